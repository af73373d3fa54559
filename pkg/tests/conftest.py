import sys
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path

import pytest

from logicfuzz.backend.interpreter import BuiltinBackend, Program
from logicfuzz.frontend import parse

CORPUS = Path(__file__).resolve().parents[1] / "src" / "logicfuzz" / "corpus"
SEEDED = CORPUS / "seeded"
EXTRACTION = CORPUS / "extraction"
FIXTURES = CORPUS / "golden_fixtures.json"
ANSWERS = CORPUS / "answers.json"
LABELS = CORPUS / "labels.json"
EXTRACTION_LABELS = CORPUS / "extraction_labels.json"

sys.path.insert(0, str(Path(__file__).parent))


def load(name: str, directory: Path = SEEDED):
    path = directory / name
    return parse(path.read_text(encoding="utf-8"), name)


def backend_for(text: str, contract=None) -> BuiltinBackend:
    return BuiltinBackend(Program(parse(text), contract))


def frac(a, b=1):
    return Fraction(a, b)


# acceptance verdicts, criterion -> part -> (ok, detail); printed at the end of the run
ACCEPTANCE: dict[str, dict[str, tuple[bool, str]]] = {}


@contextmanager
def criterion(key: str, part: str):
    """Record a PASS for ``part`` of criterion ``key`` unless the block raises."""
    info: dict[str, str] = {}
    try:
        yield info
    except BaseException as e:
        ACCEPTANCE.setdefault(key, {})[part] = (False, f"{type(e).__name__}: {str(e).splitlines()[0][:160] if str(e) else ''}")
        raise
    ACCEPTANCE.setdefault(key, {})[part] = (True, info.get("detail", "ok"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(ACCEPTANCE, key=int):
        parts = ACCEPTANCE[key]
        ok = all(p[0] for p in parts.values())
        detail = "; ".join(f"{name}: {d}" for name, (_, d) in sorted(parts.items()))
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def tmp_project(tmp_path):
    def make(files: dict[str, str]) -> Path:
        for name, text in files.items():
            (tmp_path / name).parent.mkdir(parents=True, exist_ok=True)
            (tmp_path / name).write_text(text, encoding="utf-8")
        return tmp_path

    return make
