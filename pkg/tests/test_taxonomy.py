from fractions import Fraction

import pytest

from logicfuzz.backend.state import ATTACKER, Transaction
from logicfuzz.taxonomy import (
    CheckerKind,
    Finding,
    PrimaryCategory,
    Provenance,
    Subcategory,
    ViolationReport,
    checker_kind_for,
    parent_category,
    parse_bug_scope,
    subcategories_of,
)


def test_ten_subcategories_under_four_primaries():
    assert len(Subcategory) == 10
    assert len(PrimaryCategory) == 4
    assert sum(len(subcategories_of(p)) for p in PrimaryCategory) == 10


@pytest.mark.parametrize(
    "sub, kind",
    [
        (Subcategory.AmmPriceOracleManipulation, CheckerKind.PriceChange),
        (Subcategory.NonAmmPriceOracleManipulation, CheckerKind.ExchangeRate),
        (Subcategory.ApprovalNotClear, CheckerKind.TokenChange),
        (Subcategory.RiskyFirstDeposit, CheckerKind.ShareSafety),
        (Subcategory.WrongCheckpointOrder, CheckerKind.StatementOrder),
        (Subcategory.WrongAmountLock, CheckerKind.StateChange),
    ],
)
def test_checker_kind_mapping(sub, kind):
    assert checker_kind_for(sub) == kind


def test_every_kind_is_used():
    assert {checker_kind_for(s) for s in Subcategory} == set(CheckerKind)


def test_parent_of_approval_not_clear():
    assert parent_category(Subcategory.ApprovalNotClear) == PrimaryCategory.UnauthorizedBehavior


def test_bug_scope_parsing():
    assert parse_bug_scope("all") == frozenset(Subcategory)
    assert parse_bug_scope("ApprovalNotClear") == {Subcategory.ApprovalNotClear}
    assert parse_bug_scope("PriceOracleManipulation, VoteManipulation") == {
        Subcategory.AmmPriceOracleManipulation,
        Subcategory.NonAmmPriceOracleManipulation,
        Subcategory.VoteManipulation,
    }
    with pytest.raises(ValueError):
        parse_bug_scope("Reentrancy")


def test_finding_confidence_bounds():
    with pytest.raises(ValueError):
        Finding("a.sol:A", 1, "f", Subcategory.ApprovalNotClear, Provenance.Auditor, Fraction(6, 5))


def test_finding_and_violation_round_trip():
    f = Finding("a.sol:A", 7, "f", Subcategory.VoteManipulation, Provenance.Fused, Fraction(4, 5))
    assert Finding.from_json(f.to_json()) == f
    v = ViolationReport(
        "StateChange@A.f#1", Subcategory.VoteManipulation,
        (Transaction(ATTACKER, "A", "f", (3, True, ATTACKER), 5),), "aa", "bb", 12, "f", CheckerKind.StateChange,
    )
    assert ViolationReport.from_json(v.to_json()) == v
