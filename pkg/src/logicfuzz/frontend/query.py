"""Lookups over a parsed ``SourceUnit``: name resolution, scopes, isomorphism."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator, Optional

from logicfuzz.frontend.errors import Ambiguous, NotFound, ScopeError
from logicfuzz.frontend.nodes import (
    ADDRESS,
    BOOL,
    UINT256,
    AddrLit,
    Binary,
    Block,
    BoolLit,
    CallBuiltin,
    CallInternal,
    ContractDef,
    For,
    FunctionDef,
    Ident,
    If,
    Index,
    IntLit,
    Member,
    Node,
    SourceUnit,
    TypeName,
    Unary,
    VarDecl,
    While,
)


@dataclass(frozen=True)
class NodePath:
    """Location of a node: its id, the enclosing function, and child indices from the body."""

    node_id: int
    function_id: Optional[int]
    index_path: tuple[int, ...]

    def to_json(self) -> dict:
        return {"node_id": self.node_id, "function_id": self.function_id, "index_path": list(self.index_path)}

    @classmethod
    def from_json(cls, data: dict) -> "NodePath":
        return cls(data["node_id"], data["function_id"], tuple(data["index_path"]))


def node_path(unit: SourceUnit, node: Node) -> NodePath:
    func = node if isinstance(node, FunctionDef) else unit.enclosing(node, FunctionDef)
    if func is None:
        return NodePath(node.id, None, ())
    indices: list[int] = []
    cur = node
    while cur is not func and cur is not func.body:
        parent = unit.parent(cur)
        indices.append([c.id for c in parent.children()].index(cur.id))
        cur = parent
    return NodePath(node.id, func.id, tuple(reversed(indices)))


def resolve(unit: SourceUnit, query: str) -> NodePath:
    """Resolve ``Contract.member``, a bare member name, or a numeric node id."""
    query = query.strip()
    if query.isdigit():
        node_id = int(query)
        if node_id >= unit.node_count:
            raise NotFound(f"no node with id {node_id}")
        return node_path(unit, unit.node(node_id))
    if "." in query:
        contract_name, _, member = query.partition(".")
        contracts = [c for c in unit.contracts if c.name == contract_name]
        if not contracts:
            raise NotFound(f"no contract named {contract_name!r}")
    else:
        member = query
        contracts = unit.contracts
    hits = []
    for c in contracts:
        for m in c.members:
            if isinstance(m, (FunctionDef, VarDecl)) and m.name == member:
                hits.append((c, m))
    if not hits:
        raise NotFound(f"{query!r} does not name a function or state variable")
    if len(hits) > 1:
        raise Ambiguous(query, sorted(f"{c.name}.{m.name}@{m.id}" for c, m in hits))
    return node_path(unit, hits[0][1])


def lookup(unit: SourceUnit, path: NodePath) -> Node:
    if path.node_id >= unit.node_count:
        raise NotFound(f"no node with id {path.node_id}")
    return unit.node(path.node_id)


def contract_of(unit: SourceUnit, node: Node) -> ContractDef:
    return node if isinstance(node, ContractDef) else unit.enclosing(node, ContractDef)


def callees(contract: ContractDef, func: FunctionDef) -> list[FunctionDef]:
    """Internal functions reachable from ``func``, in first-call order (excluding ``func``)."""
    seen = {func.name}
    order: list[FunctionDef] = []
    stack = [func]
    while stack:
        cur = stack.pop()
        for node in cur.body.walk():
            if isinstance(node, CallInternal) and node.name not in seen:
                target = contract.function(node.name)
                if target is not None:
                    seen.add(node.name)
                    order.append(target)
                    stack.append(target)
    return order


# ----------------------------------------------------------------- scoping


def function_env(contract: ContractDef, func: FunctionDef) -> dict[str, TypeName]:
    env = {v.name: v.type_name for v in contract.state_vars}
    for p in func.params + func.returns:
        if p.name:
            env[p.name] = p.type_name
    return env


def iter_scoped(contract: ContractDef, func: FunctionDef) -> Iterator[tuple[Node, dict[str, TypeName]]]:
    """Yield every node of ``func.body`` with the names visible at it.

    A local is visible from the statement after its declaration to the end of
    its enclosing block; a for-loop header variable covers the loop only.
    """
    yield from _walk_scoped(func.body, [function_env(contract, func)])


def _flat(scopes: list[dict]) -> dict[str, TypeName]:
    env: dict[str, TypeName] = {}
    for scope in scopes:
        env.update(scope)
    return env


def _walk_scoped(node: Node, scopes: list[dict]) -> Iterator[tuple[Node, dict]]:
    yield node, _flat(scopes)
    if isinstance(node, Block):
        scopes.append({})
        for stmt in node.statements:
            yield from _walk_scoped(stmt, scopes)
            if isinstance(stmt, VarDecl):
                scopes[-1][stmt.name] = stmt.type_name
        scopes.pop()
    elif isinstance(node, For):
        scopes.append({})
        if node.init is not None:
            yield from _walk_scoped(node.init, scopes)
            if isinstance(node.init, VarDecl):
                scopes[-1][node.init.name] = node.init.type_name
        for child in (node.cond, node.update, node.body):
            if child is not None:
                yield from _walk_scoped(child, scopes)
        scopes.pop()
    elif isinstance(node, (If, While)):
        # a bare declaration as an if/while body is scoped to that body
        for child in node.children():
            scopes.append({})
            yield from _walk_scoped(child, scopes)
            scopes.pop()
    else:
        for child in node.children():
            yield from _walk_scoped(child, scopes)


def visible_after(contract: ContractDef, func: FunctionDef, stmt: Node) -> dict[str, TypeName]:
    """Names usable in a statement inserted directly after ``stmt``."""
    for node, env in iter_scoped(contract, func):
        if node is stmt:
            env = dict(env)
            if isinstance(stmt, VarDecl):
                env[stmt.name] = stmt.type_name
            return env
    raise NotFound(f"statement {stmt.id} is not in {func.name}")


def all_function_names(contract: ContractDef, func: FunctionDef) -> dict[str, TypeName]:
    """State variables, parameters, returns and every local declared anywhere in the body."""
    env = function_env(contract, func)
    for node in func.body.walk():
        if isinstance(node, VarDecl):
            env.setdefault(node.name, node.type_name)
    return env


def _member_skip(expr: Node) -> set[int]:
    """Ids of ``msg`` and ``this`` identifiers that are not variable uses."""
    skip = set()
    for node in expr.walk():
        if isinstance(node, Member) and isinstance(node.obj, Ident) and node.obj.name == "msg":
            skip.add(id(node.obj))
        if isinstance(node, CallBuiltin) and node.name == "address":
            for a in node.args:
                if isinstance(a, Ident) and a.name == "this":
                    skip.add(id(a))
    return skip


def undeclared_names(unit: SourceUnit) -> list[ScopeError]:
    """Every identifier or internal call that does not resolve where it is used,
    plus duplicate member names and local redeclarations."""
    errors: list[ScopeError] = []
    for contract in unit.contracts:
        seen: set[str] = set()
        for m in contract.members:
            if isinstance(m, FunctionDef) and m.is_constructor:
                continue
            if isinstance(m, (FunctionDef, VarDecl)):
                if m.name in seen:
                    errors.append(ScopeError(m.name, m.span))
                seen.add(m.name)
        state_env = {v.name: v.type_name for v in contract.state_vars}
        for v in contract.state_vars:
            if v.value is not None:
                errors.extend(_scan_expr(v.value, state_env, contract))
        for func in contract.functions:
            skip = _member_skip(func.body)
            for node, env in iter_scoped(contract, func):
                if isinstance(node, VarDecl) and node.name in env and node.name not in state_env:
                    errors.append(ScopeError(node.name, node.span))
                elif isinstance(node, Ident) and id(node) not in skip and node.name not in env:
                    errors.append(ScopeError(node.name, node.span))
                elif isinstance(node, CallInternal) and contract.function(node.name) is None:
                    errors.append(ScopeError(node.name, node.span))
    return errors


def check_names(unit: SourceUnit) -> None:
    errors = undeclared_names(unit)
    if errors:
        raise errors[0]


def _scan_expr(expr: Node, env: dict, contract: ContractDef) -> list[ScopeError]:
    skip = _member_skip(expr)
    out = []
    for node in expr.walk():
        if isinstance(node, Ident) and id(node) not in skip and node.name not in env:
            out.append(ScopeError(node.name, node.span))
        elif isinstance(node, CallInternal) and contract.function(node.name) is None:
            out.append(ScopeError(node.name, node.span))
    return out


def expr_names(expr: Node) -> set[str]:
    """Variable names referenced by ``expr``."""
    skip = _member_skip(expr)
    return {n.name for n in expr.walk() if isinstance(n, Ident) and id(n) not in skip}


def type_of(expr: Node, env: dict[str, TypeName], contract: Optional[ContractDef] = None) -> Optional[TypeName]:
    """Static type of ``expr`` or ``None`` when it cannot be determined."""
    if isinstance(expr, IntLit):
        return UINT256
    if isinstance(expr, AddrLit):
        return ADDRESS
    if isinstance(expr, BoolLit):
        return BOOL
    if isinstance(expr, Ident):
        return env.get(expr.name)
    if isinstance(expr, Member):
        return ADDRESS if expr.member == "sender" else UINT256
    if isinstance(expr, Index):
        base = type_of(expr.base, env, contract)
        return base.value if base is not None and base.is_mapping else None
    if isinstance(expr, Unary):
        return BOOL if expr.op == "!" else UINT256
    if isinstance(expr, Binary):
        return UINT256 if expr.op in ("+", "-", "*", "/", "%") else BOOL
    if isinstance(expr, CallBuiltin):
        return ADDRESS
    if isinstance(expr, CallInternal):
        if contract is None:
            return None
        target = contract.function(expr.name)
        if target is None or not target.returns:
            return None
        return target.returns[0].type_name
    return None


# ---------------------------------------------------------------- structure


_IGNORED = {"span", "id", "raw_text", "path"}


def _shape(node: Node):
    fields = []
    for name in sorted(vars(node)):
        if name in _IGNORED or name.startswith("_"):
            continue
        value = getattr(node, name)
        fields.append((name, _shape_value(value)))
    return (node.kind, tuple(fields))


def _shape_value(value):
    if isinstance(value, Node):
        return _shape(value)
    if isinstance(value, list):
        return tuple(_shape_value(v) for v in value)
    return value


def isomorphic(a: Node, b: Node) -> bool:
    """Structural equality ignoring ids, spans and source text."""
    return _shape(a) == _shape(b)


def dump_ast(unit: SourceUnit) -> str:
    """JSON dump, one object per node: ``{id, kind, span, children}``."""

    def obj(node: Node) -> dict:
        return {
            "id": node.id,
            "kind": node.kind,
            "span": list(node.span),
            "children": [obj(c) for c in node.children()],
        }

    return json.dumps(obj(unit), indent=1)
