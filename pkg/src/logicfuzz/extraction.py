"""Critical-variable and principal-statement extraction with AST validation.

The model proposes items; only those that parse and resolve against the
finding's function survive.  Everything else is kept as a rejection so that
hallucinated names never reach checker generation.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from logicfuzz.analysis import code_slot
from logicfuzz.frontend.errors import FrontendError, ParseError
from logicfuzz.frontend.lexer import tokenize
from logicfuzz.frontend.nodes import (
    STATEMENT_KINDS,
    Block,
    CallInternal,
    ContractDef,
    FunctionDef,
    Ident,
    Index,
    Member,
    Node,
    SourceUnit,
    VarDecl,
)
from logicfuzz.frontend.parser import parse_expression
from logicfuzz.frontend.printer import print_expr
from logicfuzz.frontend.query import (
    NodePath,
    all_function_names,
    contract_of,
    expr_names,
    lookup,
    node_path,
    type_of,
    visible_after,
)
from logicfuzz.llm.gateway import Gateway
from logicfuzz.llm.templates import EXTRACTION, render
from logicfuzz.taxonomy import Finding, Subcategory

log = logging.getLogger(__name__)

STATEMENT_ROLES = (
    "price_read",
    "state_update",
    "transfer",
    "checkpoint_update",
    "rate_update",
    "lock_update",
    "vote_tally",
    "fee_deduction",
)


class Rejection(str, Enum):
    NotParseable = "NotParseable"
    NotInScope = "NotInScope"
    TypeUnsupported = "TypeUnsupported"
    NoMatch = "NoMatch"
    AmbiguousMatch = "AmbiguousMatch"
    UnknownRole = "UnknownRole"
    Malformed = "Malformed"


@dataclass(frozen=True)
class Rejected:
    raw: str
    reason: Rejection
    detail: str = ""

    def to_json(self) -> dict:
        return {"raw": self.raw, "reason": self.reason.value, "detail": self.detail}


@dataclass(frozen=True)
class CriticalVariable:
    name: str
    role: str
    binding: NodePath  # declaring node; the function itself for msg.* and address(this).balance
    access_expr: str
    type_name: str

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "role": self.role,
            "binding": self.binding.to_json(),
            "access_expr": self.access_expr,
            "type": self.type_name,
        }


@dataclass(frozen=True)
class PrincipalStatement:
    path: NodePath
    role: str
    text: str  # source of the matched statement, whitespace collapsed

    def to_json(self) -> dict:
        return {"path": self.path.to_json(), "role": self.role, "text": self.text}


@dataclass
class ExtractionResult:
    finding: Finding
    variables: list[CriticalVariable] = field(default_factory=list)
    statements: list[PrincipalStatement] = field(default_factory=list)
    rejected: list[Rejected] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.variables and not self.statements

    def to_json(self) -> dict:
        return {
            "finding": self.finding.to_json(),
            "variables": [v.to_json() for v in self.variables],
            "statements": [s.to_json() for s in self.statements],
            "rejected": [r.to_json() for r in self.rejected],
        }


class EmptyExtraction(Exception):
    def __init__(self, result: ExtractionResult):
        self.result = result
        f = result.finding
        super().__init__(f"no validated items for {f.function_name} / {f.subcategory.value}")


# ------------------------------------------------------------ characteristics


@dataclass(frozen=True)
class VariableRole:
    role: str
    param: Optional[str]
    description: str = ""
    direction: Optional[str] = None  # debit | credit, TokenChange only


@dataclass(frozen=True)
class Characteristic:
    subcategory: Subcategory
    variable_roles: tuple[VariableRole, ...]
    statement_roles: tuple[str, ...]
    critical_variable: str
    principal_statement: str
    order: tuple[str, ...] = ()

    def role(self, name: str) -> Optional[VariableRole]:
        key = name.strip().casefold()
        for r in self.variable_roles:
            if r.role.casefold() == key:
                return r
        return None


def load_characteristics(path: Optional[str | Path] = None) -> dict[Subcategory, Characteristic]:
    if path is None:
        text = resources.files("logicfuzz.data").joinpath("characteristics.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    data = json.loads(text)
    out = {}
    for sub in Subcategory:
        if sub.value not in data:
            raise ValueError(f"characteristics table lacks {sub.value}")
        entry = data[sub.value]
        for role in entry["statement_roles"] + entry.get("order", []):
            if role not in STATEMENT_ROLES:
                raise ValueError(f"{sub.value}: unknown statement role {role!r}")
        out[sub] = Characteristic(
            sub,
            tuple(VariableRole(r["role"], r.get("param"), r.get("description", ""), r.get("direction"))
                  for r in entry["variable_roles"]),
            tuple(entry["statement_roles"]),
            entry["prompt_fragments"]["critical_variable"],
            entry["prompt_fragments"]["principal_statement"],
            tuple(entry.get("order", ())),
        )
    return out


# ----------------------------------------------------------------- validation


def _site(unit: SourceUnit, site: NodePath) -> tuple[ContractDef, FunctionDef, Node]:
    node = lookup(unit, site)
    func = node if isinstance(node, FunctionDef) else unit.enclosing(node, FunctionDef)
    if func is None:
        raise ValueError(f"node {site.node_id} is not inside a function")
    return contract_of(unit, func), func, node


def _root(expr: Node) -> Node:
    while isinstance(expr, Index):
        expr = expr.base
    return expr


def _declaration(unit: SourceUnit, contract: ContractDef, func: FunctionDef, name: str, before: int) -> Optional[Node]:
    """The node declaring ``name`` as seen from offset ``before``: the nearest
    preceding local, else a parameter or return, else the state variable."""
    local = None
    for node in func.body.walk():
        if isinstance(node, VarDecl) and node.name == name:
            if local is None or node.span[0] <= before:
                local = node
    if local is not None:
        return local
    for p in func.params + func.returns:
        if p.name == name:
            return p
    return contract.state_var(name)


def validate_variable(
    raw: str, site: NodePath, unit: SourceUnit, role: str = ""
) -> Union[CriticalVariable, Rejected]:
    """Accept ``raw`` iff it parses as an expression whose every name resolves at ``site``.

    At a function site every name declared anywhere in the function counts;
    at a statement site only the names visible right after that statement.
    """
    text = raw.strip()
    try:
        expr = parse_expression(text)
    except (ParseError, FrontendError, ValueError):
        return Rejected(raw, Rejection.NotParseable)
    contract, func, node = _site(unit, site)
    env = all_function_names(contract, func) if node is func else visible_after(contract, func, node)
    unknown = sorted(n for n in expr_names(expr) if n not in env)
    if unknown:
        return Rejected(raw, Rejection.NotInScope, ", ".join(unknown))
    for call in expr.walk():
        if isinstance(call, CallInternal):
            target = contract.function(call.name)
            if target is None:
                return Rejected(raw, Rejection.NotInScope, call.name)
            if len(target.params) != len(call.args) or not target.returns:
                return Rejected(raw, Rejection.TypeUnsupported, f"call to {call.name}")
    t = type_of(expr, env, contract)
    if t is None or t.is_mapping:
        return Rejected(raw, Rejection.TypeUnsupported, str(t) if t else "unknown type")
    root = _root(expr)
    binding: Optional[Node] = None
    if isinstance(root, Ident):
        name = root.name
        binding = _declaration(unit, contract, func, name, node.span[0] if node is not func else func.span[1])
    elif isinstance(root, Member):
        name = print_expr(root)
    else:
        name = print_expr(expr)
    return CriticalVariable(name, role.strip(), node_path(unit, binding if binding is not None else func),
                            print_expr(expr), str(t))


def normalise_tokens(text: str) -> Optional[tuple[str, ...]]:
    try:
        toks = [t.text for t in tokenize(text) if t.kind != "eof"]
    except ParseError:
        return None
    while toks and toks[-1] == ";":
        toks.pop()
    return tuple(toks)


def function_statements(func: FunctionDef) -> list[Node]:
    return [n for n in func.body.walk() if n.kind in STATEMENT_KINDS and not isinstance(n, Block)]


def validate_statement(
    raw: str, function: NodePath, unit: SourceUnit, role: str = "state_update"
) -> Union[PrincipalStatement, Rejected]:
    """Match a quoted statement against the function body by token equality."""
    role = role.strip()
    if role not in STATEMENT_ROLES:
        return Rejected(raw, Rejection.UnknownRole, role)
    func = lookup(unit, function)
    if not isinstance(func, FunctionDef):
        func = unit.enclosing(func, FunctionDef)
    want = normalise_tokens(raw)
    if not want:
        return Rejected(raw, Rejection.NoMatch)
    hits = [s for s in function_statements(func) if normalise_tokens(unit.text_of(s)) == want]
    if not hits:
        return Rejected(raw, Rejection.NoMatch)
    if len(hits) > 1:
        return Rejected(raw, Rejection.AmbiguousMatch, f"{len(hits)} statements")
    return PrincipalStatement(node_path(unit, hits[0]), role, " ".join(unit.text_of(hits[0]).split()))


# ----------------------------------------------------------------- extraction

_ITEM_RE = re.compile(r"^\s*(VARIABLE|STATEMENT)\s*:\s*(.*?)\s+\|\s+([^|]+?)\s*$", re.IGNORECASE)
_HEAD_RE = re.compile(r"^\s*(VARIABLE|STATEMENT)\s*:", re.IGNORECASE)


def parse_response(text: str) -> list[tuple[str, str, str, str]]:
    """``(kind, body, role, raw_line)`` for every item line; malformed item lines get kind ``?``."""
    items = []
    for line in text.splitlines():
        m = _ITEM_RE.match(line)
        if m:
            items.append((m.group(1).upper(), m.group(2).strip(), m.group(3).strip(), line.strip()))
        elif _HEAD_RE.match(line):
            items.append(("?", "", "", line.strip()))
    return items


def extraction_prompt(finding: Finding, unit: SourceUnit, char: Characteristic) -> tuple[str, dict]:
    func = unit.node(finding.function_id)
    contract = contract_of(unit, func)
    roles = [r.role for r in char.variable_roles] + list(char.statement_roles)
    prompt = render(
        EXTRACTION,
        {
            "Bug": finding.subcategory.value,
            "Code": code_slot(unit, contract, func),
            "Critical Variable": char.critical_variable,
            "Principal Statement": char.principal_statement,
            "Roles": ", ".join(roles),
        },
    )
    tag = {
        "agent": "extractor",
        "stage": "extraction",
        "contract": contract.name,
        "file": unit.path.rsplit("/", 1)[-1],
        "function": func.name,
        "label": finding.subcategory.value,
    }
    return prompt, tag


def extract(
    finding: Finding,
    unit: SourceUnit,
    gateway: Gateway,
    characteristics: Optional[dict[Subcategory, Characteristic]] = None,
) -> ExtractionResult:
    """Ask for the finding's critical items and keep the ones that validate.

    Raises ``EmptyExtraction`` when nothing survives.
    """
    characteristics = characteristics or load_characteristics()
    char = characteristics[finding.subcategory]
    func = unit.node(finding.function_id)
    if not isinstance(func, FunctionDef):
        raise ValueError(f"node {finding.function_id} is not a function")
    prompt, tag = extraction_prompt(finding, unit, char)
    response = gateway.sample(prompt, 1, tag)[0]
    result = ExtractionResult(finding)
    site = node_path(unit, func)
    seen_vars: set[tuple[str, str]] = set()
    seen_stmts: set[tuple[int, str]] = set()
    for kind, body, role, line in parse_response(response):
        if kind == "VARIABLE":
            item = validate_variable(body, site, unit, role)
            if isinstance(item, CriticalVariable) and char.role(item.role) is None:
                item = Rejected(line, Rejection.UnknownRole, item.role)
            if isinstance(item, CriticalVariable):
                if (item.access_expr, item.role) not in seen_vars:
                    seen_vars.add((item.access_expr, item.role))
                    result.variables.append(item)
                continue
        elif kind == "STATEMENT":
            item = validate_statement(body, site, unit, role)
            if isinstance(item, PrincipalStatement) and item.role not in char.statement_roles:
                item = Rejected(line, Rejection.UnknownRole, item.role)
            if isinstance(item, PrincipalStatement):
                if (item.path.node_id, item.role) not in seen_stmts:
                    seen_stmts.add((item.path.node_id, item.role))
                    result.statements.append(item)
                continue
        else:
            item = Rejected(line, Rejection.Malformed)
        result.rejected.append(Rejected(line, item.reason, item.detail))
    for r in result.rejected:
        log.info("rejected extraction item for %s: %s (%s)", func.name, r.raw, r.reason.value)
    if result.empty:
        log.warning("no usable items for %s / %s; possible false negative", func.name, finding.subcategory.value)
        raise EmptyExtraction(result)
    return result
