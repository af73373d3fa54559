"""Functional-bug taxonomy and the records shared across the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional

from logicfuzz.backend.state import Transaction


class PrimaryCategory(str, Enum):
    PriceOracleManipulation = "PriceOracleManipulation"
    UnauthorizedBehavior = "UnauthorizedBehavior"
    InsecureCalculatingLogic = "InsecureCalculatingLogic"
    IncorrectControlMechanism = "IncorrectControlMechanism"


class Subcategory(str, Enum):
    AmmPriceOracleManipulation = "AmmPriceOracleManipulation"
    NonAmmPriceOracleManipulation = "NonAmmPriceOracleManipulation"
    ApprovalNotClear = "ApprovalNotClear"
    UnauthorizedTransfer = "UnauthorizedTransfer"
    WrongCheckpointOrder = "WrongCheckpointOrder"
    WrongInterestRateOrder = "WrongInterestRateOrder"
    RiskyFirstDeposit = "RiskyFirstDeposit"
    ImproperDepositFeeHandling = "ImproperDepositFeeHandling"
    WrongAmountLock = "WrongAmountLock"
    VoteManipulation = "VoteManipulation"


class CheckerKind(str, Enum):
    PriceChange = "PriceChangeChecker"
    ExchangeRate = "ExchangeRateChecker"
    TokenChange = "TokenChangeChecker"
    StatementOrder = "StatementOrderChecker"
    ShareSafety = "ShareSafetyChecker"
    StateChange = "StateChangeChecker"


class Provenance(str, Enum):
    Auditor = "Auditor"
    Attacker = "Attacker"
    Fused = "Fused"


# Higher wins when two findings share (function, subcategory).
PRECEDENCE = {Provenance.Attacker: 0, Provenance.Auditor: 1, Provenance.Fused: 2}

_S, _P, _K = Subcategory, PrimaryCategory, CheckerKind

PARENT: dict[Subcategory, PrimaryCategory] = {
    _S.AmmPriceOracleManipulation: _P.PriceOracleManipulation,
    _S.NonAmmPriceOracleManipulation: _P.PriceOracleManipulation,
    _S.ApprovalNotClear: _P.UnauthorizedBehavior,
    _S.UnauthorizedTransfer: _P.UnauthorizedBehavior,
    _S.WrongCheckpointOrder: _P.InsecureCalculatingLogic,
    _S.WrongInterestRateOrder: _P.InsecureCalculatingLogic,
    _S.RiskyFirstDeposit: _P.InsecureCalculatingLogic,
    _S.ImproperDepositFeeHandling: _P.IncorrectControlMechanism,
    _S.WrongAmountLock: _P.IncorrectControlMechanism,
    _S.VoteManipulation: _P.IncorrectControlMechanism,
}

CHECKER_KIND: dict[Subcategory, CheckerKind] = {
    _S.AmmPriceOracleManipulation: _K.PriceChange,
    _S.NonAmmPriceOracleManipulation: _K.ExchangeRate,
    _S.ApprovalNotClear: _K.TokenChange,
    _S.UnauthorizedTransfer: _K.TokenChange,
    _S.ImproperDepositFeeHandling: _K.TokenChange,
    _S.WrongCheckpointOrder: _K.StatementOrder,
    _S.WrongInterestRateOrder: _K.StatementOrder,
    _S.RiskyFirstDeposit: _K.ShareSafety,
    _S.WrongAmountLock: _K.StateChange,
    _S.VoteManipulation: _K.StateChange,
}


def parent_category(s: Subcategory) -> PrimaryCategory:
    return PARENT[Subcategory(s)]


def checker_kind_for(s: Subcategory) -> CheckerKind:
    return CHECKER_KIND[Subcategory(s)]


def subcategories_of(p: PrimaryCategory) -> list[Subcategory]:
    """Children of a primary category in declaration order."""
    return [s for s in Subcategory if PARENT[s] == p]


def parse_bug_scope(text: str) -> frozenset[Subcategory]:
    """``all`` or a comma list of subcategory or primary-category names."""
    text = text.strip()
    if text in ("", "all"):
        return frozenset(Subcategory)
    out: set[Subcategory] = set()
    for word in text.split(","):
        word = word.strip()
        if word in Subcategory.__members__:
            out.add(Subcategory[word])
        elif word in PrimaryCategory.__members__:
            out.update(subcategories_of(PrimaryCategory[word]))
        else:
            raise ValueError(f"unknown bug class {word!r}")
    return frozenset(out)


def _fraction_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class Finding:
    contract_id: str
    function_id: int
    function_name: str
    subcategory: Subcategory
    provenance: Provenance
    confidence: Fraction

    def __post_init__(self):
        if not 0 <= self.confidence <= 1:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def key(self) -> tuple[str, int, Subcategory]:
        return (self.contract_id, self.function_id, self.subcategory)

    def to_json(self) -> dict:
        return {
            "contract_id": self.contract_id,
            "function_id": self.function_id,
            "function_name": self.function_name,
            "subcategory": self.subcategory.value,
            "provenance": self.provenance.value,
            "confidence": _fraction_str(self.confidence),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Finding":
        return cls(
            data["contract_id"],
            int(data["function_id"]),
            data["function_name"],
            Subcategory(data["subcategory"]),
            Provenance(data["provenance"]),
            Fraction(data["confidence"]),
        )


@dataclass(frozen=True)
class ViolationReport:
    checker_id: str
    subcategory: Subcategory
    reproducer: tuple[Transaction, ...]
    pre_state_digest: str
    post_state_digest: str
    executions_until_violation: int
    function_name: Optional[str] = None
    kind: Optional[CheckerKind] = None
    notes: tuple[str, ...] = field(default=())

    def to_json(self) -> dict:
        return {
            "checker_id": self.checker_id,
            "subcategory": self.subcategory.value,
            "kind": self.kind.value if self.kind else None,
            "function_name": self.function_name,
            "reproducer": [t.to_json() for t in self.reproducer],
            "pre_state_digest": self.pre_state_digest,
            "post_state_digest": self.post_state_digest,
            "executions_until_violation": self.executions_until_violation,
            "notes": list(self.notes),
        }

    @classmethod
    def from_json(cls, data: dict) -> "ViolationReport":
        return cls(
            data["checker_id"],
            Subcategory(data["subcategory"]),
            tuple(Transaction.from_json(t) for t in data["reproducer"]),
            data["pre_state_digest"],
            data["post_state_digest"],
            int(data["executions_until_violation"]),
            data.get("function_name"),
            CheckerKind(data["kind"]) if data.get("kind") else None,
            tuple(data.get("notes", ())),
        )
