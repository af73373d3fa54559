"""Model clients: fixture replay, scripted answer keys and a live chat endpoint."""

from __future__ import annotations

import fnmatch
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import httpx

from logicfuzz.llm.gateway import ClientError, FixtureMiss, load_fixtures, prompt_digest

log = logging.getLogger(__name__)


@dataclass
class ModelClientConfig:
    mode: str = "replay"  # replay | live
    fixture_path: Optional[str] = None
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4-turbo"
    credential_env: str = "OPENAI_API_KEY"
    timeout: float = 60.0
    max_retries: int = 3
    temperature: float = 0.7
    max_in_flight: int = 4

    def __post_init__(self):
        if self.mode not in ("replay", "live"):
            raise ValueError(f"unknown model mode {self.mode!r}")
        if self.mode == "replay" and not self.fixture_path:
            raise ValueError("replay mode needs a fixture file")


class ReplayClient:
    """Answers from recorded fixtures; never touches the network."""

    def __init__(self, fixtures: dict[tuple[str, int], str]):
        self.table = fixtures

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayClient":
        if not Path(path).is_file():
            raise ClientError(f"fixture file {path} does not exist")
        return cls(load_fixtures(path))

    def complete(self, prompt: str, sample_index: int, tag: Optional[dict] = None) -> str:
        digest = prompt_digest(prompt)
        try:
            return self.table[(digest, sample_index)]
        except KeyError:
            raise FixtureMiss(digest, sample_index, prompt) from None


class ScriptedClient:
    """Deterministic stand-in for a model, driven by an answer key.

    The key is ``{"default": str, "rules": [{"match": {...}, "samples": [...]}]}``.
    A rule applies when every ``match`` entry equals the request tag (``file``
    is matched as a glob).  Sample ``i`` is ``samples[i % len(samples)]``; bare
    ``yes``/``no`` samples are expanded to ``ANSWER:`` lines.
    """

    def __init__(self, key: dict):
        self.default = key.get("default", "ANSWER: no")
        self.rules = key.get("rules", [])

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedClient":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def _matches(self, match: dict, tag: dict) -> bool:
        for k, v in match.items():
            have = tag.get(k)
            if k == "file":
                if have is None or not fnmatch.fnmatchcase(have, v):
                    return False
            elif have != v:
                return False
        return True

    def complete(self, prompt: str, sample_index: int, tag: Optional[dict] = None) -> str:
        tag = tag or {}
        for rule in self.rules:
            if self._matches(rule["match"], tag):
                samples = rule["samples"]
                text = samples[sample_index % len(samples)]
                return f"ANSWER: {text}" if text in ("yes", "no") else text
        return self.default


class LiveClient:
    """OpenAI-compatible chat-completion client with retries and an in-flight cap.

    The credential is read from the environment variable named in the config
    and is never logged or echoed.
    """

    def __init__(self, cfg: ModelClientConfig, transport: Optional[httpx.BaseTransport] = None):
        self.cfg = cfg
        key = os.environ.get(cfg.credential_env)
        if not key:
            raise ClientError(
                f"environment variable {cfg.credential_env} is not set; export the API key there "
                "or run with --llm replay:<fixture file>"
            )
        self._headers = {"Authorization": f"Bearer {key}"}
        self._http = httpx.Client(transport=transport, timeout=cfg.timeout)
        self._slots = threading.BoundedSemaphore(max(1, cfg.max_in_flight))

    def complete(self, prompt: str, sample_index: int, tag: Optional[dict] = None) -> str:
        body = {
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
        }
        delay = 1.0
        last_error = "no attempt made"
        for attempt in range(self.cfg.max_retries + 1):
            with self._slots:
                try:
                    resp = self._http.post(self.cfg.endpoint, json=body, headers=self._headers)
                except httpx.HTTPError as e:
                    last_error = f"{type(e).__name__}: {e}"
                    resp = None
            if resp is not None:
                if resp.status_code == 200:
                    try:
                        return resp.json()["choices"][0]["message"]["content"]
                    except (ValueError, KeyError, IndexError):
                        raise ClientError("model endpoint returned an unexpected payload") from None
                last_error = f"HTTP {resp.status_code}"
                if resp.status_code not in (408, 409, 429) and resp.status_code < 500:
                    raise ClientError(f"model endpoint rejected the request ({last_error})")
            if attempt < self.cfg.max_retries:
                log.warning("model request failed (%s); retrying in %.1fs", last_error, delay)
                time.sleep(delay)
                delay *= 2
        raise ClientError(f"model request failed after {self.cfg.max_retries + 1} attempts ({last_error})")

    def close(self) -> None:
        self._http.close()


def make_client(spec: str, transport: Optional[httpx.BaseTransport] = None, cfg: Optional[ModelClientConfig] = None):
    """Build a client from a CLI spec: ``replay:<file>``, ``scripted:<file>`` or ``live``."""
    if spec.startswith("replay:"):
        return ReplayClient.from_file(spec.split(":", 1)[1])
    if spec.startswith("scripted:"):
        return ScriptedClient.from_file(spec.split(":", 1)[1])
    if spec == "live":
        return LiveClient(cfg or ModelClientConfig(mode="live"), transport)
    raise ValueError(f"unknown model spec {spec!r}; use replay:<file>, scripted:<file> or live")
