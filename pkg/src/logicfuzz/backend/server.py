"""Reference out-of-process executor speaking the line-delimited JSON protocol.

It wraps the built-in interpreter so the external code path can be tested
without an EVM.  Run as ``python -m logicfuzz.backend.server``.
"""

from __future__ import annotations

import json
import sys
from typing import IO

from logicfuzz.backend.interpreter import BuiltinBackend, Program
from logicfuzz.backend.state import BackendError, Transaction, WorldState
from logicfuzz.frontend import parse

PROTOCOL = "minisol-exec"
VERSION = 1


def _value_json(v):
    if isinstance(v, bool) or v is None:
        return v
    return str(v)


class Session:
    def __init__(self):
        self.backend: BuiltinBackend | None = None
        self.states: dict[str, WorldState] = {}

    def _state(self, digest: str) -> WorldState:
        if digest not in self.states:
            raise KeyError(f"UnknownDigest: {digest}")
        return self.states[digest]

    def handle(self, op: str, payload: dict) -> dict:
        if op == "deploy":
            unit = parse(payload["source"], payload.get("path", "<external>"))
            spans = [tuple(s) for s in payload.get("checker_spans", [])]
            program = Program(unit, payload.get("contract"), spans)
            self.backend = BuiltinBackend(program)
            args = tuple(a if isinstance(a, bool) else int(a) for a in payload.get("ctor_args", []))
            state = self.backend.deploy(args, int(payload.get("value", "0")))
            self.states[state.digest] = state
            return {"state": state.digest}
        if self.backend is None:
            raise RuntimeError("deploy must precede other operations")
        if op == "execute":
            pre = self._state(payload["state"])
            res = self.backend.execute(pre, Transaction.from_json(payload["tx"]))
            self.states[res.new_state.digest] = res.new_state
            return {
                "status": res.status,
                "reason": res.reason,
                "state": res.new_state.digest,
                "coverage": sorted([f, b] for f, b in res.coverage),
                "events": [{"name": n, "args": [_value_json(a) for a in args]} for n, args in res.events],
                "gas": res.gas_units,
                "return": _value_json(res.return_value),
            }
        if op == "snapshot":
            return {"digest": self._state(payload["state"]).digest}
        if op == "restore":
            return {"state": self._state(payload["digest"]).digest}
        raise ValueError(f"unknown op {op!r}")


def serve(stdin: IO[str], stdout: IO[str]) -> None:
    stdout.write(json.dumps({"protocol": PROTOCOL, "version": VERSION}) + "\n")
    stdout.flush()
    session = Session()
    for line in stdin:
        if not line.strip():
            continue
        try:
            request = json.loads(line)
            result = session.handle(request["op"], request.get("payload", {}))
            reply = {"ok": True, "result": result}
        except (BackendError, KeyError, ValueError, RuntimeError, TypeError) as e:
            reply = {"ok": False, "error": str(e).strip("'\"")}
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()


def main() -> None:
    serve(sys.stdin, sys.stdout)


if __name__ == "__main__":
    main()
