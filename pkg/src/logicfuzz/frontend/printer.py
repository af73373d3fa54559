"""Canonical pretty-printer; ``parse(print_unit(u))`` is isomorphic to ``u``."""

from __future__ import annotations

from logicfuzz.frontend.nodes import (
    AddrLit,
    Assert,
    Assign,
    Binary,
    Block,
    BoolLit,
    CallBuiltin,
    CallInternal,
    ContractDef,
    EmitAlert,
    EventDef,
    ExprStmt,
    For,
    FunctionDef,
    Ident,
    If,
    Index,
    IntLit,
    Member,
    Node,
    Param,
    Require,
    Return,
    Revert,
    SourceUnit,
    Unary,
    VarDecl,
    While,
)
from logicfuzz.frontend.parser import PRECEDENCE

INDENT = "    "


def quote(message: str) -> str:
    escaped = message.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
    return f'"{escaped}"'


def print_expr(e: Node, parent_prec: int = -1) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, AddrLit):
        return "0x" + format(e.value, "040x")
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Ident):
        return e.name
    if isinstance(e, Member):
        return f"{print_expr(e.obj, 99)}.{e.member}"
    if isinstance(e, Index):
        return f"{print_expr(e.base, 99)}[{print_expr(e.index)}]"
    if isinstance(e, (CallInternal, CallBuiltin)):
        return f"{e.name}({', '.join(print_expr(a) for a in e.args)})"
    if isinstance(e, Unary):
        inner = print_expr(e.operand, 98)
        if isinstance(e.operand, Unary):
            inner = f"({inner})"
        return f"{e.op}{inner}"
    if isinstance(e, Binary):
        prec = PRECEDENCE[e.op]
        # left-associative: an equal-precedence right operand needs parentheses
        text = f"{print_expr(e.left, prec)} {e.op} {print_expr(e.right, prec + 0.5)}"
        return f"({text})" if prec < parent_prec else text
    raise TypeError(f"not an expression: {e!r}")


def _simple(s: Node) -> str:
    """Statement text without the trailing semicolon (for-loop headers)."""
    if isinstance(s, VarDecl):
        text = f"{s.type_name} {s.name}"
        return text + (f" = {print_expr(s.value)}" if s.value is not None else "")
    if isinstance(s, Assign):
        return f"{print_expr(s.target)} {s.op} {print_expr(s.value)}"
    if isinstance(s, ExprStmt):
        return print_expr(s.expr)
    raise TypeError(f"not a simple statement: {s!r}")


def print_stmt(s: Node, depth: int) -> list[str]:
    pad = INDENT * depth
    if isinstance(s, Block):
        lines = [pad + "{"]
        for child in s.statements:
            lines.extend(print_stmt(child, depth + 1))
        lines.append(pad + "}")
        return lines
    if isinstance(s, (VarDecl, Assign, ExprStmt)):
        return [pad + _simple(s) + ";"]
    if isinstance(s, If):
        lines = _with_body(pad, f"if ({print_expr(s.cond)})", s.then, depth)
        if s.orelse is not None:
            tail = _with_body(pad, "else", s.orelse, depth) if not isinstance(s.orelse, If) else None
            if tail is None:
                # else-if chains stay flat
                nested = print_stmt(s.orelse, depth)
                tail = [pad + "else " + nested[0].lstrip()] + nested[1:]
            if lines[-1] == pad + "}":
                lines[-1] = pad + "} " + tail[0].lstrip()
                lines.extend(tail[1:])
            else:
                lines.extend(tail)
        return lines
    if isinstance(s, For):
        init = _simple(s.init) if s.init is not None else ""
        cond = print_expr(s.cond) if s.cond is not None else ""
        update = _simple(s.update) if s.update is not None else ""
        return _with_body(pad, f"for ({init}; {cond}; {update})", s.body, depth)
    if isinstance(s, While):
        return _with_body(pad, f"while ({print_expr(s.cond)})", s.body, depth)
    if isinstance(s, Return):
        return [pad + ("return;" if s.value is None else f"return {print_expr(s.value)};")]
    if isinstance(s, Require):
        msg = f", {quote(s.message)}" if s.message is not None else ""
        return [pad + f"require({print_expr(s.cond)}{msg});"]
    if isinstance(s, Assert):
        return [pad + f"assert({print_expr(s.cond)});"]
    if isinstance(s, Revert):
        return [pad + (f"revert({quote(s.message)});" if s.message is not None else "revert();")]
    if isinstance(s, EmitAlert):
        return [pad + f"emit {s.event}({', '.join(print_expr(a) for a in s.args)});"]
    raise TypeError(f"not a statement: {s!r}")


def _with_body(pad: str, header: str, body: Node, depth: int) -> list[str]:
    if isinstance(body, Block):
        inner = print_stmt(body, depth)
        return [pad + header + " {"] + inner[1:]
    return [pad + header] + print_stmt(body, depth + 1)


def _params(params: list[Param]) -> str:
    return ", ".join(f"{p.type_name} {p.name}" if p.name else str(p.type_name) for p in params)


def print_member(m: Node, depth: int) -> list[str]:
    pad = INDENT * depth
    if isinstance(m, VarDecl):
        words = [str(m.type_name), m.visibility or "internal"]
        if m.constant:
            words.append("constant")
        text = " ".join(words) + f" {m.name}"
        if m.value is not None:
            text += f" = {print_expr(m.value)}"
        return [pad + text + ";"]
    if isinstance(m, EventDef):
        return [pad + f"event {m.name}({_params(m.params)});"]
    if isinstance(m, FunctionDef):
        head = "constructor" if m.is_constructor else f"function {m.name}"
        head += f"({_params(m.params)}) {m.visibility}"
        if m.mutability:
            head += f" {m.mutability}"
        if m.returns:
            head += f" returns ({_params(m.returns)})"
        body = print_stmt(m.body, depth)
        body[0] = pad + head + " {"
        return body
    raise TypeError(f"not a contract member: {m!r}")


def print_contract(c: ContractDef) -> str:
    if not c.members:
        return f"contract {c.name} {{}}"
    lines = [f"contract {c.name} {{"]
    for i, m in enumerate(c.members):
        if i and (isinstance(m, FunctionDef) or isinstance(c.members[i - 1], FunctionDef)):
            lines.append("")
        lines.extend(print_member(m, 1))
    lines.append("}")
    return "\n".join(lines)


def print_unit(unit: SourceUnit) -> str:
    parts = []
    if unit.pragma is not None:
        parts.append(f"pragma solidity {unit.pragma};")
    parts.extend(print_contract(c) for c in unit.contracts)
    return "\n\n".join(parts) + "\n"


def print_statements(stmts: list[Node], depth: int = 0) -> str:
    lines: list[str] = []
    for s in stmts:
        lines.extend(print_stmt(s, depth))
    return "\n".join(lines)
