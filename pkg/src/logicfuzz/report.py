"""Run reports and the labelled-benchmark metrics harness."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Optional

from logicfuzz.taxonomy import Finding, Subcategory, ViolationReport

SCHEMA_VERSION = 1
NA = "N/A"


class ReportFormatError(ValueError):
    pass


class UnknownContractInLabels(KeyError):
    def __init__(self, contracts: list[str]):
        self.contracts = contracts
        super().__init__(f"labels name contracts absent from the report: {', '.join(contracts)}")


class UnlabelledContract(KeyError):
    def __init__(self, contracts: list[str]):
        self.contracts = contracts
        super().__init__(f"report contains contracts without labels: {', '.join(contracts)}")


@dataclass
class ContractReport:
    contract_id: str
    findings: list[Finding] = field(default_factory=list)
    unconfirmed: list[Finding] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)
    extraction: list[dict] = field(default_factory=list)
    manifest: list[dict] = field(default_factory=list)
    violations: list[ViolationReport] = field(default_factory=list)
    campaign: Optional[dict] = None
    errors: list[str] = field(default_factory=list)
    tolerant: bool = False

    @property
    def confirmed(self) -> set[tuple[str, str, Subcategory]]:
        return {(self.contract_id, v.function_name or "", v.subcategory) for v in self.violations}

    def to_json(self) -> dict:
        return {
            "contract_id": self.contract_id,
            "findings": [f.to_json() for f in self.findings],
            "unconfirmed": [f.to_json() for f in self.unconfirmed],
            "skipped": list(self.skipped),
            "extraction": list(self.extraction),
            "manifest": list(self.manifest),
            "violations": [v.to_json() for v in self.violations],
            "campaign": self.campaign,
            "errors": list(self.errors),
            "tolerant": self.tolerant,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ContractReport":
        return cls(
            d["contract_id"],
            [Finding.from_json(x) for x in d.get("findings", [])],
            [Finding.from_json(x) for x in d.get("unconfirmed", [])],
            list(d.get("skipped", [])),
            list(d.get("extraction", [])),
            list(d.get("manifest", [])),
            [ViolationReport.from_json(x) for x in d.get("violations", [])],
            d.get("campaign"),
            list(d.get("errors", [])),
            bool(d.get("tolerant", False)),
        )


@dataclass
class BugReport:
    tool_version: str
    config: dict
    contracts: list[ContractReport] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    usage: dict = field(default_factory=dict)
    timestamp: dict = field(default_factory=dict)  # the only field carrying wall-clock data
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        known = {m["checker_id"] for c in self.contracts for m in c.manifest}
        for c in self.contracts:
            for v in c.violations:
                if v.checker_id not in known:
                    raise ReportFormatError(f"violation {v.checker_id} has no manifest entry")

    @property
    def violations(self) -> list[ViolationReport]:
        return [v for c in self.contracts for v in c.violations]

    def contract(self, contract_id: str) -> ContractReport:
        for c in self.contracts:
            if c.contract_id == contract_id:
                return c
        raise KeyError(contract_id)

    def to_json(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "tool_version": self.tool_version,
            "config": self.config,
            "contracts": [c.to_json() for c in sorted(self.contracts, key=lambda c: c.contract_id)],
            "errors": list(self.errors),
            "usage": self.usage,
            "timestamp": self.timestamp,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def from_json(cls, d: dict) -> "BugReport":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ReportFormatError(f"unsupported report schema {version!r}, expected {SCHEMA_VERSION}")
        return cls(
            d["tool_version"],
            d.get("config", {}),
            [ContractReport.from_json(c) for c in d.get("contracts", [])],
            list(d.get("errors", [])),
            d.get("usage", {}),
            d.get("timestamp", {}),
            version,
        )

    @classmethod
    def load(cls, path: str | Path) -> "BugReport":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ReportFormatError(f"{path}: not JSON ({e})") from None
        return cls.from_json(data)


def without_timestamp(doc: dict) -> dict:
    return {k: v for k, v in doc.items() if k != "timestamp"}


@dataclass(frozen=True)
class LabelSet:
    """Expected bugs: contract id to a set of (function name, subcategory)."""

    expected: dict[str, frozenset[tuple[str, Subcategory]]]

    @classmethod
    def from_json(cls, d: dict) -> "LabelSet":
        out = {}
        for cid, items in d.get("contracts", d).items():
            out[cid] = frozenset((i["function"], Subcategory(i["subcategory"])) for i in items)
        return cls(out)

    @classmethod
    def load(cls, path: str | Path) -> "LabelSet":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_json(self) -> dict:
        return {
            "contracts": {
                cid: [{"function": f, "subcategory": s.value} for f, s in sorted(items, key=lambda x: (x[0], x[1].value))]
                for cid, items in sorted(self.expected.items())
            }
        }

    def triples(self) -> set[tuple[str, str, Subcategory]]:
        return {(cid, f, s) for cid, items in self.expected.items() for f, s in items}


def _ratio(num: int, den: int) -> Optional[Fraction]:
    return Fraction(num, den) if den else None


def _pct(q: Optional[Fraction]) -> Any:
    return NA if q is None else round(float(q) * 100, 2)


@dataclass(frozen=True)
class MetricsResult:
    tp: int
    fp: int
    fn: int
    true_positives: tuple = ()
    false_positives: tuple = ()
    false_negatives: tuple = ()

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "MetricsResult":
        if min(tp, fp, fn) < 0:
            raise ValueError("counts must be non-negative")
        return cls(tp, fp, fn)

    @property
    def recall(self) -> Optional[Fraction]:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def precision(self) -> Optional[Fraction]:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def f1(self) -> Optional[Fraction]:
        return _ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn)

    def to_json(self) -> dict:
        def rows(items):
            return [{"contract_id": c, "function": f, "subcategory": s.value} for c, f, s in items]

        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "recall_pct": _pct(self.recall),
            "precision_pct": _pct(self.precision),
            "f1_pct": _pct(self.f1),
            "true_positives": rows(self.true_positives),
            "false_positives": rows(self.false_positives),
            "false_negatives": rows(self.false_negatives),
        }

    def summary(self) -> str:
        def fmt(q):
            return NA if q is None else f"{float(q) * 100:.2f}%"

        return f"TP {self.tp}  FP {self.fp}  FN {self.fn}  recall {fmt(self.recall)}  F1 {fmt(self.f1)}"


def _sorted(items: Iterable[tuple[str, str, Subcategory]]) -> tuple:
    return tuple(sorted(items, key=lambda t: (t[0], t[1], t[2].value)))


def score(report: BugReport, labels: LabelSet) -> MetricsResult:
    """Match confirmed violations against labels on (contract, function, subcategory)."""
    scanned = {c.contract_id for c in report.contracts}
    unknown = sorted(set(labels.expected) - scanned)
    if unknown:
        raise UnknownContractInLabels(unknown)
    unlabelled = sorted(scanned - set(labels.expected))
    if unlabelled:
        raise UnlabelledContract(unlabelled)
    predicted: set = set()
    for c in report.contracts:
        predicted |= c.confirmed
    expected = labels.triples()
    tp, fp, fn = predicted & expected, predicted - expected, expected - predicted
    return MetricsResult(len(tp), len(fp), len(fn), _sorted(tp), _sorted(fp), _sorted(fn))
