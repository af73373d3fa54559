"""Client for out-of-process executors (line-delimited JSON over stdio)."""

from __future__ import annotations

import json
import shlex
import subprocess
from typing import Optional

from logicfuzz.backend.interpreter import ALERT_EVENT
from logicfuzz.backend.server import PROTOCOL, VERSION
from logicfuzz.backend.state import (
    BackendCrash,
    ConstructorRevert,
    ExecResult,
    StateHandle,
    Transaction,
    UnknownDigest,
)


def _decode_value(v):
    if isinstance(v, bool) or v is None:
        return v
    return int(v)


class ExternalBackend:
    """Drives a child process; states are opaque ``StateHandle`` digests."""

    kind = "external"

    def __init__(
        self,
        command: str,
        source: str,
        contract: str,
        checker_spans: list[tuple[int, int]] = (),
        alert_map: Optional[dict[int, str]] = None,
        path: str = "<external>",
    ):
        self.command = command
        self.alert_map = dict(alert_map or {})
        self._deploy_payload = {
            "source": source,
            "path": path,
            "contract": contract,
            "checker_spans": [list(s) for s in checker_spans],
        }
        try:
            self.proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as e:
            raise BackendCrash(f"cannot start external backend {command!r}: {e}") from None
        hello = self._read()
        if hello.get("protocol") != PROTOCOL or hello.get("version") != VERSION:
            self.close()
            raise BackendCrash(f"unsupported backend handshake {hello!r}")

    def _read(self) -> dict:
        line = self.proc.stdout.readline()
        if not line:
            code = self.proc.poll()
            raise BackendCrash(f"external backend exited (code {code})")
        try:
            return json.loads(line)
        except json.JSONDecodeError:
            raise BackendCrash(f"malformed backend output: {line[:200]!r}") from None

    def _call(self, op: str, payload: dict) -> dict:
        try:
            self.proc.stdin.write(json.dumps({"op": op, "payload": payload}) + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError):
            raise BackendCrash("external backend closed its input") from None
        reply = self._read()
        if reply.get("ok"):
            return reply["result"]
        error = str(reply.get("error", "unknown error"))
        if error.startswith("UnknownDigest"):
            raise UnknownDigest(error.split(":", 1)[-1].strip())
        if error.startswith("constructor reverted"):
            raise ConstructorRevert(error.split(":", 1)[-1].strip())
        raise BackendCrash(f"{op} failed: {error}")

    def deploy(self, ctor_args: tuple = (), value: int = 0) -> StateHandle:
        payload = dict(self._deploy_payload)
        payload["ctor_args"] = [a if isinstance(a, bool) else str(a) for a in ctor_args]
        payload["value"] = str(value)
        return StateHandle(self._call("deploy", payload)["state"])

    def execute(self, state: StateHandle, tx: Transaction) -> ExecResult:
        r = self._call("execute", {"state": state.digest, "tx": tx.to_json()})
        events = tuple((e["name"], tuple(_decode_value(a) for a in e["args"])) for e in r.get("events", []))
        alerts = tuple(
            self.alert_map.get(args[0], f"alert#{args[0]}") for name, args in events if name == ALERT_EVENT and args
        )
        return ExecResult(
            r["status"],
            StateHandle(r["state"]),
            frozenset((f, b) for f, b in r.get("coverage", [])),
            alerts,
            int(r.get("gas", 0)),
            r.get("reason"),
            _decode_value(r.get("return")),
            events,
        )

    def snapshot(self, state: StateHandle) -> str:
        return self._call("snapshot", {"state": state.digest})["digest"]

    def restore(self, digest: str) -> StateHandle:
        return StateHandle(self._call("restore", {"digest": digest})["state"])

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
