from fractions import Fraction

import pytest

from conftest import EXTRACTION, FIXTURES, load
from corruption import IDENT, corrupted_items, labelled_functions
from logicfuzz.extraction import (
    CriticalVariable,
    EmptyExtraction,
    PrincipalStatement,
    Rejected,
    Rejection,
    extract,
    load_characteristics,
    parse_response,
    validate_statement,
    validate_variable,
)
from logicfuzz.frontend import parse
from logicfuzz.frontend.query import node_path
from logicfuzz.llm import Gateway, ReplayClient, ScriptedClient
from logicfuzz.taxonomy import Finding, Provenance, Subcategory

UNIT = load("approval_token.sol", EXTRACTION)
TOKEN = UNIT.contracts[0]
TRANSFER = node_path(UNIT, TOKEN.function("transferFrom"))


def site(name="transferFrom"):
    return node_path(UNIT, TOKEN.function(name))


def finding(unit, fname, sub, cid=None):
    c = unit.contracts[0]
    f = c.function(fname)
    return Finding(cid or f"{unit.path}:{c.name}", f.id, f.name, sub, Provenance.Fused, Fraction(1))


@pytest.mark.parametrize("expr,binding_kind", [
    ("allowance[from][msg.sender]", "VarDecl"),
    ("amount", "Param"),
    ("fee", "VarDecl"),
    ("msg.sender", "FunctionDef"),
    ("balances[to]", "VarDecl"),
])
def test_variable_accepted(expr, binding_kind):
    v = validate_variable(expr, TRANSFER, UNIT, "x")
    assert isinstance(v, CriticalVariable)
    assert v.access_expr == expr
    assert type(UNIT.node(v.binding.node_id)).__name__ == binding_kind


@pytest.mark.parametrize("expr,reason", [
    ("allowance[from][", Rejection.NotParseable),
    ("allowence[from][msg.sender]", Rejection.NotInScope),
    ("spender", Rejection.NotInScope),
    ("allowance[from]", Rejection.TypeUnsupported),
    ("balances", Rejection.TypeUnsupported),
    ("approved(from, amount)", Rejection.NotInScope),
    ("approve(from)", Rejection.TypeUnsupported),
])
def test_variable_rejected(expr, reason):
    r = validate_variable(expr, TRANSFER, UNIT)
    assert isinstance(r, Rejected) and r.reason == reason


def test_statement_matching_ignores_whitespace_and_semicolon():
    s = validate_statement("balances[from]  -=   amount", TRANSFER, UNIT, "state_update")
    assert isinstance(s, PrincipalStatement)
    assert s.text == "balances[from] -= amount;"


@pytest.mark.parametrize("text,role,reason", [
    ("balances[from] -= amount;", "wizardry", Rejection.UnknownRole),
    ("balances[from] += amount;", "state_update", Rejection.NoMatch),
    ("", "state_update", Rejection.NoMatch),
])
def test_statement_rejected(text, role, reason):
    r = validate_statement(text, TRANSFER, UNIT, role)
    assert isinstance(r, Rejected) and r.reason == reason


def test_ambiguous_statement():
    unit = parse("contract D { uint256 x; function f() public { x += 1; x += 1; } }", "d.sol")
    r = validate_statement("x += 1;", node_path(unit, unit.contracts[0].function("f")), unit)
    assert isinstance(r, Rejected) and r.reason == Rejection.AmbiguousMatch


def test_parse_response_flags_malformed_lines():
    items = parse_response("VARIABLE: a | role\nnoise\nSTATEMENT: no role here\nstatement: x = 1; | state_update")
    assert [k for k, *_ in items] == ["VARIABLE", "?", "STATEMENT"]


def scripted(response):
    return Gateway(ScriptedClient({"default": response, "rules": []}))


def test_extract_keeps_valid_items_and_records_rejections():
    f = finding(UNIT, "transferFrom", Subcategory.ApprovalNotClear)
    r = extract(f, UNIT, scripted(
        "VARIABLE: allowance[from][msg.sender] | allowance\n"
        "VARIABLE: allowance[from][msg.sender] | allowance\n"
        "VARIABLE: ghost | allowance\n"
        "VARIABLE: amount | made-up role\n"
        "STATEMENT: allowance[from][msg.sender] -= received; | state_update\n"
        "STATEMENT: missing separator\n"))
    assert [(v.access_expr, v.role) for v in r.variables] == [("allowance[from][msg.sender]", "allowance")]
    assert [s.text for s in r.statements] == ["allowance[from][msg.sender] -= received;"]
    assert [x.reason for x in r.rejected] == [Rejection.NotInScope, Rejection.UnknownRole, Rejection.Malformed]


def test_extract_raises_when_nothing_survives():
    f = finding(UNIT, "transferFrom", Subcategory.ApprovalNotClear)
    with pytest.raises(EmptyExtraction) as e:
        extract(f, UNIT, scripted("NONE"))
    assert e.value.result.empty


def test_characteristics_cover_every_subcategory():
    table = load_characteristics()
    assert set(table) == set(Subcategory)
    assert table[Subcategory.ApprovalNotClear].role("ALLOWANCE") is not None


def is_accepted(kind, raw, role, entry, unit):
    func = unit.contracts[0].function(entry["function"])
    path = node_path(unit, func)
    item = validate_variable(raw, path, unit, role) if kind == "VARIABLE" else validate_statement(raw, path, unit, role)
    return not isinstance(item, Rejected)


def test_corruptions_are_rejected():
    accepted = [(k, raw) for k, raw, *rest in corrupted_items(1000, seed=11) if is_accepted(k, raw, *rest)]
    assert accepted == []


def test_corruption_really_introduces_unknown_name():
    for kind, raw, role, e, unit in corrupted_items(200, seed=3):
        assert set(IDENT.findall(raw)) - set(IDENT.findall(unit.raw_text))


def golden_extraction():
    gw = Gateway(ReplayClient.from_file(FIXTURES))
    mismatches = []
    for e, text, unit in labelled_functions():
        f = finding(unit, e["function"], Subcategory(e["subcategory"]), f"{e['file']}:{unit.contracts[0].name}")
        r = extract(f, unit, gw)
        got = (sorted([v.access_expr, v.role] for v in r.variables), sorted([s.text, s.role] for s in r.statements))
        if got != (sorted(e["variables"]), sorted(e["statements"])):
            mismatches.append((e["file"], e["function"], got))
    return mismatches


def test_golden_extraction_matches_labels():
    assert golden_extraction() == []
