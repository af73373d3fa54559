"""Model gateway: sampling, answer normalisation, majority voting and transcripts."""

from __future__ import annotations

import hashlib
import json
import re
import threading
import uuid
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Protocol


class ClientError(Exception):
    """Network, timeout or configuration failure of a model client."""


class FixtureMiss(ClientError):
    def __init__(self, digest: str, sample_index: int, prompt: str = ""):
        self.digest = digest
        self.sample_index = sample_index
        self.prompt = prompt
        head = prompt.strip().splitlines()[-1] if prompt.strip() else ""
        super().__init__(f"no recorded response for prompt {digest[:16]} sample {sample_index} ({head[:80]!r})")


class ModelClient(Protocol):
    def complete(self, prompt: str, sample_index: int, tag: Optional[dict] = None) -> str: ...


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


_ANSWER_RE = re.compile(r"^\s*ANSWER\s*:\s*(yes|no)\s*\.?\s*$", re.IGNORECASE | re.MULTILINE)
_CATEGORY_RE = re.compile(r"^\s*CATEGORY\s*:\s*([A-Za-z][\w-]*)\s*$", re.IGNORECASE | re.MULTILINE)


def parse_answer(text: str) -> Optional[str]:
    """Normalise a response to ``yes``, ``no`` or a case-folded category token.

    The last matching line wins so that models may reason before answering.
    """
    hits = [(m.start(), m.group(1).casefold()) for m in _ANSWER_RE.finditer(text)]
    hits += [(m.start(), m.group(1).casefold()) for m in _CATEGORY_RE.finditer(text)]
    if not hits:
        return None
    return max(hits)[1]


@dataclass(frozen=True)
class MajorityAnswer:
    answer: str
    votes: int
    samples: tuple[Optional[str], ...]


def majority(parsed: Iterable[Optional[str]]) -> MajorityAnswer:
    parsed = tuple(parsed)
    counts = Counter(a for a in parsed if a is not None)
    if not counts:
        return MajorityAnswer("no", 0, parsed)
    top = max(counts.values())
    tied = sorted(a for a, c in counts.items() if c == top)
    # ties resolve toward suspecting a bug
    answer = "yes" if "yes" in tied else tied[0]
    return MajorityAnswer(answer, top, parsed)


@dataclass(frozen=True)
class TranscriptEntry:
    prompt_digest: str
    prompt_text: str
    response_text: str
    sample_index: int


@dataclass
class Transcript:
    session_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    entries: list[TranscriptEntry] = field(default_factory=list)

    def __post_init__(self):
        self._lock = threading.Lock()

    def append(self, entry: TranscriptEntry) -> None:
        with self._lock:
            self.entries.append(entry)

    def fixtures(self) -> list[dict]:
        seen: dict[tuple[str, int], str] = {}
        for e in self.entries:
            seen.setdefault((e.prompt_digest, e.sample_index), e.response_text)
        return [
            {"prompt_digest": d, "sample_index": i, "response_text": seen[(d, i)]}
            for d, i in sorted(seen)
        ]

    def save(self, path: str | Path) -> None:
        save_fixtures(path, self.fixtures())


def save_fixtures(path: str | Path, fixtures: list[dict]) -> None:
    text = json.dumps(fixtures, indent=1, sort_keys=True, ensure_ascii=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_fixtures(path: str | Path) -> dict[tuple[str, int], str]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise ValueError(f"{path}: fixture file must be a JSON array")
    table: dict[tuple[str, int], str] = {}
    for item in data:
        table[(item["prompt_digest"], int(item["sample_index"]))] = item["response_text"]
    return table


@dataclass
class Usage:
    prompts: int = 0
    samples: int = 0
    prompt_tokens: int = 0
    response_tokens: int = 0

    def to_json(self) -> dict:
        return dict(vars(self))


def approx_tokens(text: str) -> int:
    """Rough token count (about four characters per token)."""
    return (len(text) + 3) // 4


class Gateway:
    """Front door to a model client; every sample is appended to ``transcript``."""

    def __init__(self, client: ModelClient, transcript: Optional[Transcript] = None, parallel: int = 1):
        self.client = client
        self.transcript = transcript if transcript is not None else Transcript()
        self.parallel = max(1, parallel)
        self.usage = Usage()
        self._usage_lock = threading.Lock()

    def ask(self, prompt: str, sample_index: int = 0, tag: Optional[dict] = None) -> str:
        text = self.client.complete(prompt, sample_index, tag)
        self.transcript.append(TranscriptEntry(prompt_digest(prompt), prompt, text, sample_index))
        with self._usage_lock:
            self.usage.samples += 1
            self.usage.prompt_tokens += approx_tokens(prompt)
            self.usage.response_tokens += approx_tokens(text)
        return text

    def sample(self, prompt: str, k: int, tag: Optional[dict] = None) -> list[str]:
        if k < 1:
            raise ValueError("k must be at least 1")
        with self._usage_lock:
            self.usage.prompts += 1
        if self.parallel == 1 or k == 1:
            return [self.ask(prompt, i, tag) for i in range(k)]
        with ThreadPoolExecutor(max_workers=min(k, self.parallel)) as pool:
            futures = [pool.submit(self.ask, prompt, i, tag) for i in range(k)]
            return [f.result() for f in futures]

    def ask_majority(self, prompt: str, k: int = 5, tag: Optional[dict] = None) -> MajorityAnswer:
        return majority(parse_answer(t) for t in self.sample(prompt, k, tag))


@dataclass(frozen=True)
class ScriptItem:
    prompt: str
    k: int = 1
    tag: Optional[dict] = None


def record_session(client: ModelClient, script: Iterable[ScriptItem], out: Optional[str | Path] = None) -> Transcript:
    """Run ``script`` against ``client`` and optionally persist it as a fixture file."""
    gateway = Gateway(client)
    for item in script:
        gateway.sample(item.prompt, item.k, item.tag)
    if out is not None:
        gateway.transcript.save(out)
    return gateway.transcript
