"""AST node types for MiniSol.

Every node carries a preorder ``id`` (dense, root is 0) and a ``span`` of
``[start, end)`` offsets into ``SourceUnit.raw_text``.  Child spans nest
inside their parent's span.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar, Iterator, Optional, Union


@dataclass(frozen=True)
class TypeName:
    name: str  # uint256 | address | bool | mapping
    key: Optional["TypeName"] = None
    value: Optional["TypeName"] = None

    def __str__(self) -> str:
        if self.name == "mapping":
            return f"mapping({self.key} => {self.value})"
        return self.name

    @property
    def is_mapping(self) -> bool:
        return self.name == "mapping"

    def default(self):
        if self.name == "bool":
            return False
        if self.name == "mapping":
            return {}
        return 0


UINT256 = TypeName("uint256")
ADDRESS = TypeName("address")
BOOL = TypeName("bool")


@dataclass(eq=False, kw_only=True)
class Node:
    span: tuple[int, int] = (0, 0)
    id: int = -1

    kind: ClassVar[str] = "Node"
    child_fields: ClassVar[tuple[str, ...]] = ()

    def children(self) -> Iterator["Node"]:
        for name in self.child_fields:
            value = getattr(self, name)
            if value is None:
                continue
            if isinstance(value, list):
                yield from value
            else:
                yield value

    def walk(self) -> Iterator["Node"]:
        """Preorder traversal."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(list(node.children())))


# ---------------------------------------------------------------- expressions


@dataclass(eq=False)
class IntLit(Node):
    value: int
    kind: ClassVar[str] = "IntLit"


@dataclass(eq=False)
class AddrLit(Node):
    value: int
    kind: ClassVar[str] = "AddrLit"


@dataclass(eq=False)
class BoolLit(Node):
    value: bool
    kind: ClassVar[str] = "BoolLit"


@dataclass(eq=False)
class Ident(Node):
    name: str
    kind: ClassVar[str] = "Ident"


@dataclass(eq=False)
class Member(Node):
    obj: "Expr"
    member: str
    kind: ClassVar[str] = "Member"
    child_fields: ClassVar[tuple[str, ...]] = ("obj",)


@dataclass(eq=False)
class Index(Node):
    base: "Expr"
    index: "Expr"
    kind: ClassVar[str] = "Index"
    child_fields: ClassVar[tuple[str, ...]] = ("base", "index")


@dataclass(eq=False)
class Binary(Node):
    op: str
    left: "Expr"
    right: "Expr"
    kind: ClassVar[str] = "Binary"
    child_fields: ClassVar[tuple[str, ...]] = ("left", "right")


@dataclass(eq=False)
class Unary(Node):
    op: str
    operand: "Expr"
    kind: ClassVar[str] = "Unary"
    child_fields: ClassVar[tuple[str, ...]] = ("operand",)


@dataclass(eq=False)
class CallInternal(Node):
    name: str
    args: list["Expr"]
    kind: ClassVar[str] = "CallInternal"
    child_fields: ClassVar[tuple[str, ...]] = ("args",)


@dataclass(eq=False)
class CallBuiltin(Node):
    name: str  # address
    args: list["Expr"]
    kind: ClassVar[str] = "CallBuiltin"
    child_fields: ClassVar[tuple[str, ...]] = ("args",)


Expr = Union[IntLit, AddrLit, BoolLit, Ident, Member, Index, Binary, Unary, CallInternal, CallBuiltin]
EXPRESSION_KINDS = frozenset(
    c.kind for c in (IntLit, AddrLit, BoolLit, Ident, Member, Index, Binary, Unary, CallInternal, CallBuiltin)
)


# ----------------------------------------------------------------- statements


@dataclass(eq=False)
class VarDecl(Node):
    """Local variable statement or contract state variable (``visibility`` set)."""

    type_name: TypeName
    name: str
    value: Optional["Expr"] = None
    visibility: Optional[str] = None
    constant: bool = False
    is_state: bool = False
    kind: ClassVar[str] = "VarDecl"
    child_fields: ClassVar[tuple[str, ...]] = ("value",)


@dataclass(eq=False)
class Block(Node):
    statements: list["Stmt"]
    kind: ClassVar[str] = "Block"
    child_fields: ClassVar[tuple[str, ...]] = ("statements",)


@dataclass(eq=False)
class Assign(Node):
    target: "Expr"
    op: str  # = += -= *= /= %=
    value: "Expr"
    # ``i++`` is stored as ``i += 1``; the literal gets an empty span.
    kind: ClassVar[str] = "Assign"
    child_fields: ClassVar[tuple[str, ...]] = ("target", "value")


@dataclass(eq=False)
class If(Node):
    cond: "Expr"
    then: "Stmt"
    orelse: Optional["Stmt"] = None
    kind: ClassVar[str] = "If"
    child_fields: ClassVar[tuple[str, ...]] = ("cond", "then", "orelse")


@dataclass(eq=False)
class For(Node):
    init: Optional["Stmt"]
    cond: Optional["Expr"]
    update: Optional["Stmt"]
    body: "Stmt"
    kind: ClassVar[str] = "For"
    child_fields: ClassVar[tuple[str, ...]] = ("init", "cond", "update", "body")


@dataclass(eq=False)
class While(Node):
    cond: "Expr"
    body: "Stmt"
    kind: ClassVar[str] = "While"
    child_fields: ClassVar[tuple[str, ...]] = ("cond", "body")


@dataclass(eq=False)
class Return(Node):
    value: Optional["Expr"] = None
    kind: ClassVar[str] = "Return"
    child_fields: ClassVar[tuple[str, ...]] = ("value",)


@dataclass(eq=False)
class Require(Node):
    cond: "Expr"
    message: Optional[str] = None
    kind: ClassVar[str] = "Require"
    child_fields: ClassVar[tuple[str, ...]] = ("cond",)


@dataclass(eq=False)
class Assert(Node):
    cond: "Expr"
    kind: ClassVar[str] = "Assert"
    child_fields: ClassVar[tuple[str, ...]] = ("cond",)


@dataclass(eq=False)
class Revert(Node):
    message: Optional[str] = None
    kind: ClassVar[str] = "Revert"


@dataclass(eq=False)
class ExprStmt(Node):
    expr: "Expr"
    kind: ClassVar[str] = "ExprStmt"
    child_fields: ClassVar[tuple[str, ...]] = ("expr",)


@dataclass(eq=False)
class EmitAlert(Node):
    """``emit Event(args);`` -- the alert hook is ``emit __PromAlert(id)``."""

    event: str
    args: list["Expr"]
    kind: ClassVar[str] = "EmitAlert"
    child_fields: ClassVar[tuple[str, ...]] = ("args",)


Stmt = Union[VarDecl, Block, Assign, If, For, While, Return, Require, Assert, Revert, ExprStmt, EmitAlert]
STATEMENT_KINDS = frozenset(
    c.kind for c in (VarDecl, Block, Assign, If, For, While, Return, Require, Assert, Revert, ExprStmt, EmitAlert)
)


# -------------------------------------------------------------- declarations


@dataclass(eq=False)
class Param(Node):
    type_name: TypeName
    name: Optional[str]
    kind: ClassVar[str] = "Param"


@dataclass(eq=False)
class EventDef(Node):
    name: str
    params: list[Param]
    kind: ClassVar[str] = "EventDef"
    child_fields: ClassVar[tuple[str, ...]] = ("params",)


@dataclass(eq=False)
class FunctionDef(Node):
    name: str  # "constructor" for constructors
    params: list[Param]
    returns: list[Param]
    visibility: str
    mutability: Optional[str]  # view | pure | payable | None
    body: Block
    is_constructor: bool = False
    kind: ClassVar[str] = "FunctionDef"
    child_fields: ClassVar[tuple[str, ...]] = ("params", "returns", "body")

    @property
    def payable(self) -> bool:
        return self.mutability == "payable"

    @property
    def callable_externally(self) -> bool:
        return not self.is_constructor and self.visibility in ("public", "external")


@dataclass(eq=False)
class ContractDef(Node):
    name: str
    members: list[Union[VarDecl, FunctionDef, EventDef]]
    kind: ClassVar[str] = "ContractDef"
    child_fields: ClassVar[tuple[str, ...]] = ("members",)

    @property
    def state_vars(self) -> list[VarDecl]:
        return [m for m in self.members if isinstance(m, VarDecl)]

    @property
    def functions(self) -> list[FunctionDef]:
        return [m for m in self.members if isinstance(m, FunctionDef)]

    @property
    def events(self) -> list[EventDef]:
        return [m for m in self.members if isinstance(m, EventDef)]

    def function(self, name: str) -> Optional[FunctionDef]:
        for f in self.functions:
            if f.name == name:
                return f
        return None

    def state_var(self, name: str) -> Optional[VarDecl]:
        for v in self.state_vars:
            if v.name == name:
                return v
        return None


@dataclass(eq=False)
class SourceUnit(Node):
    path: str
    pragma: Optional[str]
    contracts: list[ContractDef]
    raw_text: str = field(repr=False, default="")
    kind: ClassVar[str] = "SourceUnit"
    child_fields: ClassVar[tuple[str, ...]] = ("contracts",)

    def __post_init__(self):
        self._index: dict[int, Node] = {}
        self._parents: dict[int, Node] = {}

    def assign_ids(self) -> None:
        self._index.clear()
        self._parents.clear()
        for i, node in enumerate(self.walk()):
            node.id = i
            self._index[i] = node
        for node in self._index.values():
            for child in node.children():
                self._parents[child.id] = node

    def node(self, node_id: int) -> Node:
        return self._index[node_id]

    def parent(self, node: Node) -> Optional[Node]:
        return self._parents.get(node.id)

    @property
    def node_count(self) -> int:
        return len(self._index)

    def contract(self, name: str) -> Optional[ContractDef]:
        for c in self.contracts:
            if c.name == name:
                return c
        return None

    def enclosing(self, node: Node, cls: type) -> Optional[Node]:
        cur = self.parent(node)
        while cur is not None and not isinstance(cur, cls):
            cur = self.parent(cur)
        return cur

    def text_of(self, node: Node) -> str:
        return self.raw_text[node.span[0]:node.span[1]]
