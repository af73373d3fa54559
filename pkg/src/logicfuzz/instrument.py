"""Checker placement and span-based source splicing.

Insertions never replace text, so the manifest of inserted spans is enough to
recover the original source byte for byte.  Every rewrite is re-parsed and
name-checked before it is accepted.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path, PurePosixPath
from typing import Iterable, Optional

from logicfuzz.backend.interpreter import Program
from logicfuzz.checkers import ALERT_FUNCTION, CheckerInstance, render_alert_decl
from logicfuzz.frontend.errors import FrontendError, ParseError
from logicfuzz.frontend.nodes import (
    Assign,
    CallInternal,
    ContractDef,
    For,
    FunctionDef,
    If,
    Index,
    Node,
    SourceUnit,
    VarDecl,
    While,
)
from logicfuzz.frontend.parser import parse
from logicfuzz.frontend.query import NodePath, lookup, node_path, undeclared_names
from logicfuzz.taxonomy import CheckerKind

log = logging.getLogger(__name__)

PREFIX = "__prom_"


class Strategy(str, Enum):
    VariableOriented = "VariableOriented"
    StatementOriented = "StatementOriented"


@dataclass(frozen=True)
class InsertionPlan:
    checker_id: str
    prelude_at: NodePath  # insert before
    assertion_at: NodePath  # insert after
    strategy: Strategy
    markers: tuple[tuple[NodePath, str], ...] = ()


class NoWriteSite(Exception):
    pass


class SpliceConflict(Exception):
    pass


class ReparseFailure(Exception):
    def __init__(self, checker_id: Optional[str], fragment: str, message: str):
        self.checker_id = checker_id
        self.fragment = fragment
        self.message = message
        super().__init__(f"instrumented source does not re-parse ({message}); offending fragment: {fragment!r}")


# ------------------------------------------------------------------ planning


def _root(target: Node) -> Optional[str]:
    while isinstance(target, Index):
        target = target.base
    return getattr(target, "name", None)


class WriteIndex:
    """Names a statement writes, directly or through internal calls."""

    def __init__(self, contract: ContractDef):
        self.contract = contract
        self._state = {v.name for v in contract.state_vars}
        self._memo: dict[str, frozenset[str]] = {}

    def _direct(self, node: Node) -> tuple[set[str], list[str]]:
        names, calls = set(), []
        for n in node.walk():
            if isinstance(n, Assign):
                root = _root(n.target)
                if root:
                    names.add(root)
            elif isinstance(n, VarDecl):
                names.add(n.name)
            elif isinstance(n, CallInternal):
                calls.append(n.name)
        return names, calls

    def callee_writes(self, name: str, active: Optional[set] = None) -> frozenset[str]:
        if name in self._memo:
            return self._memo[name]
        func = self.contract.function(name)
        if func is None:
            return frozenset()
        active = set() if active is None else active
        if name in active:
            return frozenset()
        active.add(name)
        local = {p.name for p in func.params + func.returns if p.name}
        names, calls = self._direct(func.body)
        local |= {n.name for n in func.body.walk() if isinstance(n, VarDecl)}
        out = {n for n in names if n in self._state and n not in local}
        for c in calls:
            out |= self.callee_writes(c, active)
        active.discard(name)
        self._memo[name] = frozenset(out)
        return self._memo[name]

    def writes(self, stmt: Node) -> set[str]:
        names, calls = self._direct(stmt)
        for c in calls:
            names |= self.callee_writes(c)
        return names


def top_level_ancestor(unit: SourceUnit, func: FunctionDef, node: Node) -> Node:
    cur = node
    while True:
        parent = unit.parent(cur)
        if parent is None:
            raise NoWriteSite(f"node {node.id} is not inside {func.name}")
        if parent is func.body:
            return cur
        cur = parent


def _function(unit: SourceUnit, inst: CheckerInstance) -> FunctionDef:
    func = unit.node(inst.finding.function_id) if inst.finding.function_id < unit.node_count else None
    if not isinstance(func, FunctionDef) or func.name != inst.function:
        raise NoWriteSite(f"{inst.checker_id}: function {inst.function} is not node {inst.finding.function_id}")
    return func


def plan(inst: CheckerInstance, unit: SourceUnit) -> InsertionPlan:
    """Variable-oriented placement around the first and last top-level write of
    a tracked variable; principal statements are the fallback."""
    func = _function(unit, inst)
    contract = unit.enclosing(func, ContractDef)
    top = func.body.statements
    if inst.kind != CheckerKind.StatementOrder and inst.tracked:
        index = WriteIndex(contract)
        tracked = set(inst.tracked)
        sites = [s for s in top if index.writes(s) & tracked]
        if sites:
            return InsertionPlan(inst.checker_id, node_path(unit, sites[0]), node_path(unit, sites[-1]),
                                 Strategy.VariableOriented, inst.markers)
    anchors = [lookup(unit, p) for p in inst.anchors]
    if not anchors:
        raise NoWriteSite(f"{inst.checker_id}: no tracked write and no principal statement in {func.name}")
    tops = sorted({top_level_ancestor(unit, func, a).id: top_level_ancestor(unit, func, a) for a in anchors}.values(),
                  key=lambda n: n.span[0])
    return InsertionPlan(inst.checker_id, node_path(unit, tops[0]), node_path(unit, tops[-1]),
                         Strategy.StatementOriented, inst.markers)


# ------------------------------------------------------------------ splicing

_MARKER, _ASSERTION, _PRELUDE, _MEMBER = 0, 1, 2, 3


@dataclass(frozen=True)
class _Insertion:
    offset: int
    order: int
    rank: int
    text: str
    owner: Optional[str]  # checker id, None for shared support code


@dataclass
class ManifestEntry:
    checker_id: str
    alert_id: int
    kind: str
    subcategory: str
    contract: str
    function: str
    strategy: str
    spans: list[tuple[int, int]]

    def to_json(self) -> dict:
        d = dict(vars(self))
        d["spans"] = [list(s) for s in self.spans]
        return d


@dataclass
class InstrumentedUnit:
    original: SourceUnit
    rewritten: SourceUnit
    text: str
    manifest: list[ManifestEntry]
    support_spans: list[tuple[int, int]]
    instances: list[CheckerInstance] = field(default_factory=list)
    plans: list[InsertionPlan] = field(default_factory=list)

    @property
    def checker_spans(self) -> list[tuple[int, int]]:
        spans = [s for e in self.manifest for s in e.spans] + list(self.support_spans)
        return sorted(spans)

    @property
    def alert_map(self) -> dict[int, str]:
        return {e.alert_id: e.checker_id for e in self.manifest}

    def program(self, contract_name: Optional[str] = None) -> Program:
        return Program(self.rewritten, contract_name, self.checker_spans, self.alert_map)

    def strip(self) -> str:
        return strip(self.text, self.checker_spans)

    def manifest_json(self) -> dict:
        return {
            "source": self.original.path,
            "checkers": [e.to_json() for e in self.manifest],
            "support_spans": [list(s) for s in self.support_spans],
        }


def strip(text: str, spans: Iterable[tuple[int, int]]) -> str:
    for s, e in sorted(spans, reverse=True):
        text = text[:s] + text[e:]
    return text


def _indent(text: str, offset: int) -> str:
    line_start = text.rfind("\n", 0, offset) + 1
    prefix = text[line_start:offset]
    if prefix.strip():
        prefix = prefix[: len(prefix) - len(prefix.lstrip())]
    return prefix


def _offset_of(text: str, line: int, col: int) -> int:
    pos = 0
    for _ in range(line - 1):
        pos = text.index("\n", pos) + 1
    return pos + col - 1


def _bare_branch(unit: SourceUnit, node: Node) -> bool:
    parent = unit.parent(node)
    if isinstance(parent, If):
        return node is parent.then or node is parent.orelse
    return isinstance(parent, (For, While)) and node is parent.body


def apply(plans: list[InsertionPlan], instances: list[CheckerInstance], unit: SourceUnit) -> InstrumentedUnit:
    """Splice every planned checker into ``unit`` and re-parse the result."""
    text = unit.raw_text
    by_id = {i.checker_id: i for i in instances}
    seen: set[str] = set()
    for p in plans:
        if p.checker_id in seen:
            raise SpliceConflict(f"{p.checker_id} is planned twice")
        if p.checker_id not in by_id:
            raise SpliceConflict(f"plan for unknown checker {p.checker_id}")
        seen.add(p.checker_id)
    rank = {p.checker_id: i for i, p in enumerate(plans)}
    ins: list[_Insertion] = []

    def before(path: NodePath, frag: str, order: int, owner: str) -> None:
        node = lookup(unit, path)
        ins.append(_Insertion(node.span[0], order, rank[owner], frag + "\n" + _indent(text, node.span[0]), owner))

    def after(path: NodePath, frag: str, order: int, owner: str) -> None:
        node = lookup(unit, path)
        ins.append(_Insertion(node.span[1], order, rank[owner], "\n" + _indent(text, node.span[0]) + frag, owner))

    contracts_with_checkers: dict[str, ContractDef] = {}
    for p in plans:
        inst = by_id[p.checker_id]
        if p.prelude_at.function_id != inst.finding.function_id or p.assertion_at.function_id != inst.finding.function_id:
            raise SpliceConflict(f"{p.checker_id}: insertion points leave {inst.function}")
        pre, post = lookup(unit, p.prelude_at), lookup(unit, p.assertion_at)
        if pre.span[0] > post.span[0]:
            raise SpliceConflict(f"{p.checker_id}: prelude would follow the assertion")
        before(p.prelude_at, inst.prelude, _PRELUDE, p.checker_id)
        after(p.assertion_at, inst.assertion, _ASSERTION, p.checker_id)
        for path, frag in p.markers:
            node = lookup(unit, path)
            if _bare_branch(unit, node):
                # an unbraced branch body gets braces so the marker stays inside the branch
                ins.append(_Insertion(node.span[0], _MARKER, rank[p.checker_id], "{ ", p.checker_id))
                frag += " }"
            after(path, frag, _MARKER, p.checker_id)
        contract = unit.contract(inst.contract)
        if contract is None:
            raise SpliceConflict(f"{p.checker_id}: no contract {inst.contract}")
        contracts_with_checkers[contract.name] = contract
        if inst.state_fragment:
            ins.append(_Insertion(contract.span[1] - 1, _MEMBER, rank[p.checker_id],
                                  "\n    " + inst.state_fragment + "\n", p.checker_id))
    decl = render_alert_decl().replace("\n", "\n    ")
    for contract in contracts_with_checkers.values():
        if contract.function(ALERT_FUNCTION) is not None:
            continue
        ins.append(_Insertion(contract.span[1] - 1, _MEMBER, len(plans), "\n    " + decl + "\n", None))

    ins.sort(key=lambda i: (i.offset, i.order, i.rank))
    out, cursor, shift = [], 0, 0
    owned: dict[str, list[tuple[int, int]]] = {cid: [] for cid in rank}
    support: list[tuple[int, int]] = []
    for i in ins:
        out.append(text[cursor:i.offset])
        cursor = i.offset
        start = i.offset + shift
        span = (start, start + len(i.text))
        (owned[i.owner] if i.owner else support).append(span)
        out.append(i.text)
        shift += len(i.text)
    out.append(text[cursor:])
    new_text = "".join(out)

    def owner_at(offset: int) -> tuple[Optional[str], str]:
        for cid, spans in owned.items():
            for s, e in spans:
                if s <= offset < e:
                    return cid, new_text[s:e].strip()
        for s, e in support:
            if s <= offset < e:
                return None, new_text[s:e].strip()
        return None, ""

    try:
        rewritten = parse(new_text, unit.path)
    except ParseError as e:
        cid, frag = owner_at(_offset_of(new_text, e.line, e.col))
        raise ReparseFailure(cid, frag, str(e)) from None
    except FrontendError as e:
        raise ReparseFailure(None, "", str(e)) from None
    errors = undeclared_names(rewritten)
    if errors:
        cid, frag = owner_at(errors[0].span[0])
        raise ReparseFailure(cid, frag, str(errors[0]))

    manifest = []
    plan_by_id = {p.checker_id: p for p in plans}
    for p in plans:
        inst = by_id[p.checker_id]
        manifest.append(ManifestEntry(
            inst.checker_id, inst.alert_id, inst.kind.value, inst.finding.subcategory.value,
            inst.contract, inst.function, plan_by_id[p.checker_id].strategy.value, sorted(owned[p.checker_id]),
        ))
    return InstrumentedUnit(unit, rewritten, new_text, manifest, sorted(support),
                            [by_id[p.checker_id] for p in plans], list(plans))


@dataclass
class InstrumentOutcome:
    unit: InstrumentedUnit
    skipped: list[tuple[str, str]]  # (checker id, reason)


def instrument(unit: SourceUnit, instances: list[CheckerInstance]) -> InstrumentOutcome:
    """Plan and apply all checkers, dropping any that cannot be placed or break the re-parse."""
    skipped: list[tuple[str, str]] = []
    plans, kept = [], []
    for inst in instances:
        try:
            plans.append(plan(inst, unit))
            kept.append(inst)
        except NoWriteSite as e:
            log.warning("skipping %s: %s", inst.checker_id, e)
            skipped.append((inst.checker_id, f"NoWriteSite: {e}"))
    while True:
        try:
            return InstrumentOutcome(apply(plans, kept, unit), skipped)
        except ReparseFailure as e:
            if e.checker_id is None or len(plans) == 0:
                raise
            log.warning("dropping %s: %s", e.checker_id, e)
            skipped.append((e.checker_id, f"ReparseFailure: {e.message}"))
            plans = [p for p in plans if p.checker_id != e.checker_id]
            kept = [i for i in kept if i.checker_id != e.checker_id]


def artifact_paths(directory: str | Path, source_path: str) -> tuple[Path, Path]:
    stem = PurePosixPath(source_path).name.removesuffix(".sol")
    directory = Path(directory)
    return directory / f"{stem}.instrumented.sol", directory / f"{stem}.manifest.json"


def write_artifacts(iu: InstrumentedUnit, directory: str | Path) -> tuple[Path, Path]:
    src, man = artifact_paths(directory, iu.original.path)
    src.parent.mkdir(parents=True, exist_ok=True)
    src.write_text(iu.text, encoding="utf-8")
    man.write_text(json.dumps(iu.manifest_json(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return src, man


def observable_digest(state, contract: str) -> str:
    """Digest of a world state with checker bookkeeping variables removed."""
    storage = {k: v for k, v in state.storage[contract].items() if not k.startswith(PREFIX)}

    def canon(v):
        if isinstance(v, dict):
            return {str(k): canon(x) for k, x in sorted(v.items())}
        return v if isinstance(v, bool) else str(v)

    doc = {"storage": canon(storage), "balances": canon(state.balances)}
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()
