"""Recursive-descent parser for MiniSol.

MiniSol is the Solidity 0.8 subset this package can execute: a single level of
contracts, value types ``uint256``/``address``/``bool``, and (nested) mappings
keyed by address.  Constructs outside the subset raise ``UnsupportedFeature``
rather than ``ParseError`` so callers can fall back to tolerant span mode.
"""

from __future__ import annotations

from typing import Optional

from logicfuzz.frontend.errors import ParseError, UnsupportedFeature
from logicfuzz.frontend.lexer import UNITS, Token, number_value, tokenize
from logicfuzz.frontend.nodes import (
    ADDRESS,
    BOOL,
    UINT256,
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
    TypeName,
    Unary,
    VarDecl,
    While,
)

UNSUPPORTED_KEYWORDS = {
    "assembly": "inline assembly",
    "import": "imports",
    "interface": "interfaces",
    "library": "libraries",
    "abstract": "abstract contracts",
    "modifier": "modifiers",
    "struct": "structs",
    "enum": "enums",
    "using": "using-for directives",
    "unchecked": "unchecked blocks",
    "delete": "delete",
    "try": "try/catch",
    "new": "contract creation",
    "error": "custom errors",
    "receive": "receive functions",
    "fallback": "fallback functions",
    "do": "do-while loops",
    "string": "string types",
    "bytes": "bytes types",
    "immutable": "immutable variables",
    "override": "overrides",
    "virtual": "virtual functions",
    "indexed": "indexed event parameters",
}

VALUE_TYPES = {"uint256": UINT256, "uint": UINT256, "address": ADDRESS, "bool": BOOL}
ASSIGN_OPS = {"=", "+=", "-=", "*=", "/=", "%="}

# binary precedence, loosest first
_LEVELS = [
    ("||",),
    ("&&",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("+", "-"),
    ("*", "/", "%"),
]
PRECEDENCE = {op: i for i, ops in enumerate(_LEVELS) for op in ops}


def _is_address_hex(text: str) -> bool:
    digits = text[2:].replace("_", "")
    return len(digits) == 40


class Parser:
    def __init__(self, text: str, path: str = "<memory>"):
        self.text = text
        self.path = path
        self.tokens = tokenize(text)
        self.pos = 0

    # -------------------------------------------------------------- helpers

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, text: str) -> bool:
        tok = self.tok
        return tok.text == text and tok.kind in ("punct", "ident")

    def accept(self, text: str) -> Optional[Token]:
        if self.at(text):
            return self.advance()
        return None

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(repr(text))
        return self.advance()

    def expect_ident(self) -> Token:
        tok = self.tok
        if tok.kind != "ident":
            self.fail("identifier")
        self.check_supported(tok)
        return self.advance()

    def fail(self, expected: str):
        tok = self.tok
        raise ParseError(tok.line, tok.col, expected, found=tok.text or "end of input")

    def check_supported(self, tok: Token) -> None:
        if tok.kind == "ident" and tok.text in UNSUPPORTED_KEYWORDS:
            raise UnsupportedFeature((tok.start, tok.end), UNSUPPORTED_KEYWORDS[tok.text])

    def prev_end(self) -> int:
        return self.tokens[self.pos - 1].end if self.pos else 0

    def span_from(self, start: int) -> tuple[int, int]:
        return (start, self.prev_end())

    # ---------------------------------------------------------- top level

    def parse_unit(self) -> SourceUnit:
        pragma = None
        contracts: list[ContractDef] = []
        while self.tok.kind != "eof":
            tok = self.tok
            self.check_supported(tok)
            if tok.text == "pragma":
                if pragma is not None or contracts:
                    raise ParseError(tok.line, tok.col, "a single leading pragma", found="pragma")
                pragma = self.parse_pragma()
            elif tok.text == "contract":
                contracts.append(self.parse_contract())
            else:
                self.fail("'contract'")
        unit = SourceUnit(self.path, pragma, contracts, raw_text=self.text, span=(0, len(self.text)))
        unit.assign_ids()
        return unit

    def parse_pragma(self) -> str:
        self.expect("pragma")
        start_tok = self.tok
        if start_tok.text != "solidity":
            self.fail("'solidity'")
        while not self.at(";"):
            if self.tok.kind == "eof":
                self.fail("';'")
            self.advance()
        body = self.text[start_tok.end:self.tok.start].strip()
        self.expect(";")
        return body

    def parse_contract(self) -> ContractDef:
        start = self.expect("contract").start
        name = self.expect_ident().text
        if self.at("is"):
            raise UnsupportedFeature((self.tok.start, self.tok.end), "inheritance")
        self.expect("{")
        members = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.fail("'}'")
            members.append(self.parse_member())
        self.expect("}")
        return ContractDef(name, members, span=self.span_from(start))

    def parse_member(self):
        tok = self.tok
        self.check_supported(tok)
        if tok.text == "function":
            return self.parse_function()
        if tok.text == "constructor":
            return self.parse_function(constructor=True)
        if tok.text == "event":
            return self.parse_event()
        return self.parse_state_var()

    def parse_type(self) -> TypeName:
        tok = self.tok
        self.check_supported(tok)
        if tok.text == "mapping":
            self.advance()
            self.expect("(")
            key = self.parse_type()
            if key != ADDRESS:
                raise UnsupportedFeature((tok.start, self.prev_end()), f"mapping key type {key}")
            self.expect("=>")
            value = self.parse_type()
            self.expect(")")
            t = TypeName("mapping", key, value)
            if not (value == UINT256 or (value.is_mapping and value.value == UINT256)):
                raise UnsupportedFeature((tok.start, self.prev_end()), f"type {t}")
            return t
        if tok.kind == "ident" and tok.text in VALUE_TYPES:
            self.advance()
            if tok.text == "address" and self.at("payable"):
                raise UnsupportedFeature((self.tok.start, self.tok.end), "address payable")
            if self.at("["):
                raise UnsupportedFeature((self.tok.start, self.tok.end), "arrays")
            return VALUE_TYPES[tok.text]
        if tok.kind == "ident" and (tok.text.startswith(("uint", "int", "bytes")) or tok.text == "string"):
            raise UnsupportedFeature((tok.start, tok.end), f"type {tok.text}")
        self.fail("type name")

    def parse_state_var(self) -> VarDecl:
        start = self.tok.start
        type_name = self.parse_type()
        visibility = None
        constant = False
        while self.tok.text in ("public", "private", "internal", "constant", "immutable"):
            self.check_supported(self.tok)
            word = self.advance().text
            if word == "constant":
                constant = True
            else:
                visibility = word
        name = self.expect_ident().text
        value = None
        if self.accept("="):
            value = self.parse_expr()
        elif constant:
            self.fail("'=' (constants need a value)")
        self.expect(";")
        return VarDecl(
            type_name, name, value, visibility=visibility or "internal",
            constant=constant, is_state=True, span=self.span_from(start),
        )

    def parse_params(self) -> list[Param]:
        self.expect("(")
        params = []
        while not self.at(")"):
            start = self.tok.start
            t = self.parse_type()
            if t.is_mapping:
                raise UnsupportedFeature((start, self.prev_end()), "mapping parameters")
            self.check_supported(self.tok)
            if self.tok.text in ("memory", "storage", "calldata"):
                raise UnsupportedFeature((self.tok.start, self.tok.end), "data locations")
            name = None
            if self.tok.kind == "ident":
                name = self.expect_ident().text
            params.append(Param(t, name, span=self.span_from(start)))
            if not self.accept(","):
                break
        self.expect(")")
        return params

    def parse_event(self) -> EventDef:
        start = self.expect("event").start
        name = self.expect_ident().text
        params = self.parse_params()
        self.expect(";")
        return EventDef(name, params, span=self.span_from(start))

    def parse_function(self, constructor: bool = False) -> FunctionDef:
        start = self.tok.start
        if constructor:
            self.advance()
            name = "constructor"
        else:
            self.expect("function")
            name = self.expect_ident().text
        params = self.parse_params()
        visibility = None
        mutability = None
        returns: list[Param] = []
        while not self.at("{"):
            tok = self.tok
            self.check_supported(tok)
            if tok.text in ("public", "external", "internal", "private"):
                visibility = self.advance().text
            elif tok.text in ("view", "pure", "payable"):
                mutability = self.advance().text
            elif tok.text == "returns":
                self.advance()
                returns = self.parse_params()
                if len(returns) != 1:
                    raise UnsupportedFeature((tok.start, self.prev_end()), "multiple return values")
            elif tok.kind == "ident":
                raise UnsupportedFeature((tok.start, tok.end), "modifiers")
            else:
                self.fail("'{'")
        if visibility is None:
            visibility = "public"
        body = self.parse_block()
        return FunctionDef(
            name, params, returns, visibility, mutability, body,
            is_constructor=constructor, span=self.span_from(start),
        )

    # ----------------------------------------------------------- statements

    def parse_block(self) -> Block:
        start = self.expect("{").start
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.fail("'}'")
            stmts.append(self.parse_statement())
        self.expect("}")
        return Block(stmts, span=self.span_from(start))

    def _starts_decl(self) -> bool:
        tok = self.tok
        if tok.kind != "ident":
            return False
        if tok.text == "mapping":
            return True
        if tok.text in VALUE_TYPES:
            # address(x) is an expression, address y is a declaration
            return self.peek().kind == "ident"
        return False

    def parse_statement(self):
        tok = self.tok
        self.check_supported(tok)
        text = tok.text if tok.kind == "ident" or tok.kind == "punct" else None
        if text == "{":
            return self.parse_block()
        if text == "if":
            return self.parse_if()
        if text == "for":
            return self.parse_for()
        if text == "while":
            start = self.advance().start
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            body = self.parse_statement()
            return While(cond, body, span=self.span_from(start))
        if text == "return":
            start = self.advance().start
            value = None if self.at(";") else self.parse_expr()
            self.expect(";")
            return Return(value, span=self.span_from(start))
        if text == "emit":
            start = self.advance().start
            event = self.expect_ident().text
            args = self.parse_args()
            self.expect(";")
            return EmitAlert(event, args, span=self.span_from(start))
        if text in ("require", "assert", "revert") and self.peek().text == "(":
            return self.parse_check(text)
        stmt = self.parse_simple()
        self.expect(";")
        stmt.span = self.span_from(stmt.span[0])
        return stmt

    def parse_simple(self):
        """Declaration, assignment or expression statement without the trailing ';'."""
        start = self.tok.start
        if self._starts_decl():
            t = self.parse_type()
            if t.is_mapping:
                raise UnsupportedFeature((start, self.prev_end()), "local mappings")
            self.check_supported(self.tok)
            if self.tok.text in ("memory", "storage", "calldata"):
                raise UnsupportedFeature((self.tok.start, self.tok.end), "data locations")
            name = self.expect_ident().text
            value = self.parse_expr() if self.accept("=") else None
            return VarDecl(t, name, value, span=self.span_from(start))
        expr = self.parse_expr()
        tok = self.tok
        if tok.kind == "punct" and tok.text in ASSIGN_OPS:
            self._check_lvalue(expr)
            op = self.advance().text
            value = self.parse_expr()
            return Assign(expr, op, value, span=self.span_from(start))
        if tok.kind == "punct" and tok.text in ("++", "--"):
            self._check_lvalue(expr)
            self.advance()
            end = self.prev_end()
            op = "+=" if tok.text == "++" else "-="
            return Assign(expr, op, IntLit(1, span=(end, end)), span=(start, end))
        if not isinstance(expr, CallInternal):
            raise ParseError(tok.line, tok.col, "assignment or call statement", found=tok.text)
        return ExprStmt(expr, span=self.span_from(start))

    def _check_lvalue(self, expr) -> None:
        base = expr
        while isinstance(base, Index):
            base = base.base
        if not isinstance(base, Ident):
            tok = self.tok
            raise ParseError(tok.line, tok.col, "assignable expression before operator", found=tok.text)

    def parse_check(self, word: str):
        start = self.advance().start
        self.expect("(")
        if word == "revert":
            message = self.parse_string() if self.tok.kind == "string" else None
            self.expect(")")
            self.expect(";")
            return Revert(message, span=self.span_from(start))
        cond = self.parse_expr()
        message = None
        if word == "require" and self.accept(","):
            message = self.parse_string()
        self.expect(")")
        self.expect(";")
        if word == "require":
            return Require(cond, message, span=self.span_from(start))
        return Assert(cond, span=self.span_from(start))

    def parse_string(self) -> str:
        tok = self.tok
        if tok.kind != "string":
            self.fail("string literal")
        self.advance()
        body = tok.text[1:-1]
        out = []
        i = 0
        while i < len(body):
            ch = body[i]
            if ch == "\\" and i + 1 < len(body):
                nxt = body[i + 1]
                out.append({"n": "\n", "t": "\t"}.get(nxt, nxt))
                i += 2
            else:
                out.append(ch)
                i += 1
        return "".join(out)

    def parse_if(self) -> If:
        start = self.expect("if").start
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        then = self.parse_statement()
        orelse = None
        if self.accept("else"):
            orelse = self.parse_statement()
        return If(cond, then, orelse, span=self.span_from(start))

    def parse_for(self) -> For:
        start = self.expect("for").start
        self.expect("(")
        init = None if self.at(";") else self.parse_simple()
        self.expect(";")
        cond = None if self.at(";") else self.parse_expr()
        self.expect(";")
        update = None if self.at(")") else self.parse_simple()
        self.expect(")")
        body = self.parse_statement()
        return For(init, cond, update, body, span=self.span_from(start))

    # ---------------------------------------------------------- expressions

    def parse_expr(self, level: int = 0):
        if level == len(_LEVELS):
            return self.parse_unary()
        start = self.tok.start
        left = self.parse_expr(level + 1)
        ops = _LEVELS[level]
        while self.tok.kind == "punct" and self.tok.text in ops:
            op = self.advance().text
            right = self.parse_expr(level + 1)
            left = Binary(op, left, right, span=self.span_from(start))
        if self.tok.kind == "punct" and self.tok.text in ("?", "&", "|", "^", "~", "**", "<<", ">>"):
            raise UnsupportedFeature((self.tok.start, self.tok.end), f"operator {self.tok.text}")
        return left

    def parse_unary(self):
        tok = self.tok
        if tok.kind == "punct" and tok.text in ("!", "-"):
            self.advance()
            operand = self.parse_unary()
            return Unary(tok.text, operand, span=self.span_from(tok.start))
        if tok.kind == "punct" and tok.text in ("~", "++", "--"):
            raise UnsupportedFeature((tok.start, tok.end), f"prefix operator {tok.text}")
        return self.parse_postfix()

    def parse_args(self) -> list:
        self.expect("(")
        args = []
        while not self.at(")"):
            args.append(self.parse_expr())
            if not self.accept(","):
                break
        self.expect(")")
        return args

    def parse_postfix(self):
        start = self.tok.start
        expr = self.parse_primary()
        while True:
            if self.at("["):
                self.advance()
                index = self.parse_expr()
                self.expect("]")
                expr = Index(expr, index, span=self.span_from(start))
            elif self.at("."):
                self.advance()
                member_tok = self.expect_ident()
                expr = Member(expr, member_tok.text, span=self.span_from(start))
                if self.at("("):
                    raise UnsupportedFeature((start, self.tok.end), f"member call .{member_tok.text}()")
                self._check_member(expr)
            elif self.at("("):
                raise UnsupportedFeature((start, self.tok.end), "calls through expressions")
            else:
                return expr

    def _check_member(self, expr: Member) -> None:
        obj = expr.obj
        if isinstance(obj, Ident) and obj.name == "msg" and expr.member in ("sender", "value"):
            return
        if isinstance(obj, CallBuiltin) and obj.name == "address" and expr.member == "balance":
            return
        raise UnsupportedFeature(expr.span, f"member access .{expr.member}")

    def parse_primary(self):
        tok = self.tok
        self.check_supported(tok)
        if tok.kind == "number":
            self.advance()
            value = number_value(tok.text)
            if self.tok.kind == "ident" and self.tok.text in UNITS:
                value *= UNITS[self.advance().text]
            elif self.tok.kind == "ident" and self.tok.text in ("seconds", "minutes", "hours", "days", "weeks"):
                raise UnsupportedFeature((self.tok.start, self.tok.end), "time units")
            return IntLit(value, span=self.span_from(tok.start))
        if tok.kind == "hex":
            self.advance()
            value = int(tok.text.replace("_", ""), 16)
            if _is_address_hex(tok.text):
                return AddrLit(value, span=(tok.start, tok.end))
            return IntLit(value, span=(tok.start, tok.end))
        if tok.kind == "string":
            raise UnsupportedFeature((tok.start, tok.end), "string expressions")
        if tok.kind == "punct" and tok.text == "(":
            self.advance()
            inner = self.parse_expr()
            self.expect(")")
            return inner
        if tok.kind != "ident":
            self.fail("expression")
        if tok.text in ("true", "false"):
            self.advance()
            return BoolLit(tok.text == "true", span=(tok.start, tok.end))
        if tok.text == "address" and self.peek().text == "(":
            self.advance()
            args = self.parse_args()
            if len(args) != 1:
                raise ParseError(tok.line, tok.col, "one argument to address()")
            arg = args[0]
            if not (isinstance(arg, Ident) and arg.name == "this") and not isinstance(arg, (IntLit, AddrLit)):
                raise UnsupportedFeature((tok.start, self.prev_end()), "address conversion of expressions")
            return CallBuiltin("address", args, span=self.span_from(tok.start))
        if tok.text in ("payable", "block", "tx", "abi", "keccak256", "type", "now", "super", "selfdestruct"):
            raise UnsupportedFeature((tok.start, tok.end), f"builtin {tok.text}")
        self.advance()
        if self.at("("):
            args = self.parse_args()
            return CallInternal(tok.text, args, span=self.span_from(tok.start))
        return Ident(tok.text, span=(tok.start, tok.end))


def parse(text: str, path: str = "<memory>") -> SourceUnit:
    """Parse MiniSol source into a ``SourceUnit`` with preorder node ids."""
    return Parser(text, path).parse_unit()


def parse_expression(text: str):
    """Parse a standalone expression (ids are not assigned)."""
    p = Parser(text)
    expr = p.parse_expr()
    if p.tok.kind != "eof":
        p.fail("end of expression")
    return expr


def parse_statements(text: str) -> list[Node]:
    """Parse a sequence of statements, e.g. an instrumentation fragment."""
    p = Parser(text)
    stmts = []
    while p.tok.kind != "eof":
        stmts.append(p.parse_statement())
    return stmts
