"""Built-in MiniSol interpreter.

Function bodies are compiled once into nested Python closures; executing a
transaction then only walks closures.  Arithmetic follows Solidity 0.8
checked semantics over unsigned 256-bit integers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Optional

from logicfuzz.backend.state import (
    ACTORS,
    CHECKER_ERROR,
    CONTRACT_ADDRESS,
    INITIAL_NATIVE,
    MAX_ADDRESS,
    MAX_UINT,
    OK,
    OWNER,
    REVERTED,
    ConstructorRevert,
    ExecResult,
    Transaction,
    TxTypeError,
    UnknownDigest,
    WorldState,
)
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
    ExprStmt,
    For,
    FunctionDef,
    Ident,
    If,
    Index,
    IntLit,
    Member,
    Node,
    Require,
    Return,
    Revert,
    SourceUnit,
    TypeName,
    Unary,
    VarDecl,
    While,
)

STEP_CAP = 2**20
LOOP_CAP = 2**16
CALL_DEPTH_CAP = 64
ALERT_EVENT = "__PromAlert"

_EMPTY: dict = {}


class RevertSignal(Exception):
    def __init__(self, reason: str):
        self.reason = reason


class CheckerFault(Exception):
    def __init__(self, reason: str):
        self.reason = reason


class Ctx:
    """Per-transaction mutable execution context."""

    __slots__ = ("storage", "copied", "balances", "sender", "value", "this", "steps",
                 "alerts", "events", "coverage", "depth")

    def __init__(self, storage: dict, balances: dict, sender: int, value: int, this: int):
        self.storage = storage
        self.copied: set[str] = set()
        self.balances = balances
        self.sender = sender
        self.value = value
        self.this = this
        self.steps = 0
        self.alerts: list[int] = []
        self.events: list[tuple[str, tuple]] = []
        self.coverage: set[tuple[int, int]] = set()
        self.depth = 0


class Frame:
    __slots__ = ("ctx", "locals", "ret")

    def __init__(self, ctx: Ctx, local_vars: dict):
        self.ctx = ctx
        self.locals = local_vars
        self.ret = None


def _step(ctx: Ctx) -> None:
    ctx.steps += 1
    if ctx.steps > STEP_CAP:
        raise RevertSignal("OutOfSteps")


# ------------------------------------------------------------- arithmetic


def checked_add(a: int, b: int) -> int:
    r = a + b
    if r > MAX_UINT:
        raise RevertSignal("Overflow")
    return r


def checked_sub(a: int, b: int) -> int:
    if b > a:
        raise RevertSignal("Underflow")
    return a - b


def checked_mul(a: int, b: int) -> int:
    r = a * b
    if r > MAX_UINT:
        raise RevertSignal("Overflow")
    return r


def checked_div(a: int, b: int) -> int:
    if b == 0:
        raise RevertSignal("DivisionByZero")
    return a // b


def checked_mod(a: int, b: int) -> int:
    if b == 0:
        raise RevertSignal("DivisionByZero")
    return a % b


ARITH = {"+": checked_add, "-": checked_sub, "*": checked_mul, "/": checked_div, "%": checked_mod}
COMPARE = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}


def _copy_mapping(m: dict) -> dict:
    return {k: (dict(v) if isinstance(v, dict) else v) for k, v in m.items()}


# --------------------------------------------------------------- compiler


@dataclass
class CompiledFunction:
    node: FunctionDef
    param_names: list[str]
    param_types: list[TypeName]
    return_name: Optional[str]
    return_type: Optional[TypeName]
    body: Callable[[Frame], bool] = field(repr=False, default=None)


class Program:
    """A compiled contract.

    ``checker_spans`` are source ranges of instrumentation code: a revert that
    originates inside them is reported as ``CheckerError``.  ``alert_map``
    translates numeric alert ids to checker ids.
    """

    def __init__(
        self,
        unit: SourceUnit,
        contract_name: Optional[str] = None,
        checker_spans: Iterable[tuple[int, int]] = (),
        alert_map: Optional[dict[int, str]] = None,
    ):
        self.unit = unit
        if contract_name is None:
            if len(unit.contracts) != 1:
                raise ValueError("contract name required for multi-contract units")
            contract_name = unit.contracts[0].name
        contract = unit.contract(contract_name)
        if contract is None:
            raise ValueError(f"no contract {contract_name!r}")
        self.contract: ContractDef = contract
        self.name = contract_name
        self.checker_spans = sorted(checker_spans)
        self.alert_map = dict(alert_map or {})
        self.state_types = {v.name: v.type_name for v in contract.state_vars}
        self.functions: dict[str, CompiledFunction] = {}
        for f in contract.functions:
            key = "constructor" if f.is_constructor else f.name
            self.functions[key] = self._compile_function(f)

    # -------------------------------------------------------- public api

    @property
    def external_functions(self) -> list[CompiledFunction]:
        return [cf for cf in self.functions.values() if cf.node.callable_externally]

    def _in_checker(self, node: Node) -> bool:
        s, e = node.span
        return any(a <= s and e <= b for a, b in self.checker_spans)

    # -------------------------------------------------------- functions

    def _compile_function(self, f: FunctionDef) -> CompiledFunction:
        local_names = {p.name for p in f.params + f.returns if p.name}
        for node in f.body.walk():
            if isinstance(node, VarDecl):
                local_names.add(node.name)
        self._locals = local_names
        self._fid = f.id
        cf = CompiledFunction(
            f,
            [p.name or f"_arg{i}" for i, p in enumerate(f.params)],
            [p.type_name for p in f.params],
            f.returns[0].name if f.returns else None,
            f.returns[0].type_name if f.returns else None,
        )
        cf.body = self._stmt(f.body)
        return cf

    def _invoke(self, cf: CompiledFunction, ctx: Ctx, args: list) -> Any:
        local_vars = dict(zip(cf.param_names, args))
        if cf.return_name:
            local_vars[cf.return_name] = cf.return_type.default()
        frame = Frame(ctx, local_vars)
        ctx.coverage.add((cf.node.id, 2 * cf.node.id))
        ctx.depth += 1
        if ctx.depth > CALL_DEPTH_CAP:
            raise RevertSignal("CallDepth")
        if cf.body(frame):
            result = frame.ret
        else:
            result = local_vars.get(cf.return_name) if cf.return_name else None
        ctx.depth -= 1
        return result

    # -------------------------------------------------------- statements

    def _stmt(self, s: Node) -> Callable[[Frame], bool]:
        fn = self._stmt_inner(s)
        if self.checker_spans and self._in_checker(s):
            inner = fn

            def guarded(f: Frame) -> bool:
                try:
                    return inner(f)
                except RevertSignal as e:
                    raise CheckerFault(e.reason) from None

            return guarded
        return fn

    def _stmt_inner(self, s: Node) -> Callable[[Frame], bool]:
        fid = self._fid
        if isinstance(s, Block):
            stmts = [self._stmt(c) for c in s.statements]

            def run_block(f: Frame) -> bool:
                for st in stmts:
                    if st(f):
                        return True
                return False

            return run_block

        if isinstance(s, VarDecl):
            name = s.name
            default = s.type_name.default()
            value = self._expr(s.value) if s.value is not None else None

            def run_decl(f: Frame) -> bool:
                _step(f.ctx)
                f.locals[name] = value(f) if value is not None else default
                return False

            return run_decl

        if isinstance(s, Assign):
            store = self._store(s.target)
            value = self._expr(s.value)
            if s.op == "=":

                def run_assign(f: Frame) -> bool:
                    _step(f.ctx)
                    store(f, value(f))
                    return False

                return run_assign
            load = self._expr(s.target)
            op = ARITH[s.op[0]]

            def run_compound(f: Frame) -> bool:
                _step(f.ctx)
                # evaluation order: target first, then value (as solc does for simple lvalues)
                old = load(f)
                store(f, op(old, value(f)))
                return False

            return run_compound

        if isinstance(s, If):
            cond = self._expr(s.cond)
            then = self._stmt(s.then)
            orelse = self._stmt(s.orelse) if s.orelse is not None else None
            arm0, arm1 = (fid, 2 * s.id), (fid, 2 * s.id + 1)

            def run_if(f: Frame) -> bool:
                _step(f.ctx)
                if cond(f):
                    f.ctx.coverage.add(arm0)
                    return then(f)
                f.ctx.coverage.add(arm1)
                return orelse(f) if orelse is not None else False

            return run_if

        if isinstance(s, (For, While)):
            init = self._stmt(s.init) if isinstance(s, For) and s.init is not None else None
            cond = self._expr(s.cond) if s.cond is not None else (lambda f: True)
            update = self._stmt(s.update) if isinstance(s, For) and s.update is not None else None
            body = self._stmt(s.body)
            arm0, arm1 = (fid, 2 * s.id), (fid, 2 * s.id + 1)

            def run_loop(f: Frame) -> bool:
                if init is not None and init(f):
                    return True
                n = 0
                while True:
                    _step(f.ctx)
                    if not cond(f):
                        f.ctx.coverage.add(arm1)
                        return False
                    n += 1
                    if n > LOOP_CAP:
                        raise RevertSignal("LoopBound")
                    f.ctx.coverage.add(arm0)
                    if body(f):
                        return True
                    if update is not None:
                        update(f)

            return run_loop

        if isinstance(s, Return):
            value = self._expr(s.value) if s.value is not None else None

            def run_return(f: Frame) -> bool:
                _step(f.ctx)
                f.ret = value(f) if value is not None else None
                return True

            return run_return

        if isinstance(s, Require):
            cond = self._expr(s.cond)
            reason = f"require: {s.message}" if s.message is not None else "require"
            arm0, arm1 = (fid, 2 * s.id), (fid, 2 * s.id + 1)

            def run_require(f: Frame) -> bool:
                _step(f.ctx)
                if cond(f):
                    f.ctx.coverage.add(arm0)
                    return False
                f.ctx.coverage.add(arm1)
                raise RevertSignal(reason)

            return run_require

        if isinstance(s, Assert):
            cond = self._expr(s.cond)

            def run_assert(f: Frame) -> bool:
                _step(f.ctx)
                if not cond(f):
                    raise RevertSignal("assert")
                return False

            return run_assert

        if isinstance(s, Revert):
            reason = f"revert: {s.message}" if s.message is not None else "revert"

            def run_revert(f: Frame) -> bool:
                _step(f.ctx)
                raise RevertSignal(reason)

            return run_revert

        if isinstance(s, ExprStmt):
            expr = self._expr(s.expr)

            def run_expr(f: Frame) -> bool:
                _step(f.ctx)
                expr(f)
                return False

            return run_expr

        if isinstance(s, EmitAlert):
            args = [self._expr(a) for a in s.args]
            event = s.event
            if event == ALERT_EVENT:
                first = args[0]

                def run_alert(f: Frame) -> bool:
                    _step(f.ctx)
                    alert_id = first(f)
                    f.ctx.alerts.append(alert_id)
                    f.ctx.events.append((ALERT_EVENT, (alert_id,)))
                    return False

                return run_alert

            def run_emit(f: Frame) -> bool:
                _step(f.ctx)
                f.ctx.events.append((event, tuple(a(f) for a in args)))
                return False

            return run_emit

        raise TypeError(f"cannot execute {s.kind}")

    # -------------------------------------------------------- lvalues

    def _store(self, target: Node) -> Callable[[Frame, Any], None]:
        if isinstance(target, Ident):
            name = target.name
            if name in self._locals:

                def store_local(f: Frame, v) -> None:
                    f.locals[name] = v

                return store_local

            def store_state(f: Frame, v) -> None:
                f.ctx.storage[name] = v

            return store_state
        # mapping writes: m[k] or m[k1][k2], copy-on-first-write per transaction
        keys = []
        cur = target
        while isinstance(cur, Index):
            keys.append(self._expr(cur.index))
            cur = cur.base
        keys.reverse()
        name = cur.name
        if len(keys) == 1:
            k0 = keys[0]

            def store_map1(f: Frame, v) -> None:
                ctx = f.ctx
                key = k0(f)
                if name not in ctx.copied:
                    ctx.storage[name] = dict(ctx.storage[name])
                    ctx.copied.add(name)
                m = ctx.storage[name]
                if v:
                    m[key] = v
                else:
                    m.pop(key, None)

            return store_map1
        k0, k1 = keys

        def store_map2(f: Frame, v) -> None:
            ctx = f.ctx
            a = k0(f)
            b = k1(f)
            if name not in ctx.copied:
                ctx.storage[name] = _copy_mapping(ctx.storage[name])
                ctx.copied.add(name)
            m = ctx.storage[name]
            inner = m.get(a)
            if v:
                if inner is None:
                    inner = m[a] = {}
                inner[b] = v
            elif inner is not None:
                inner.pop(b, None)
                if not inner:
                    del m[a]

        return store_map2

    # -------------------------------------------------------- expressions

    def _expr(self, e: Node) -> Callable[[Frame], Any]:
        if isinstance(e, (IntLit, AddrLit, BoolLit)):
            v = e.value
            if isinstance(e, IntLit) and v > MAX_UINT:
                raise TypeError(f"literal {v} exceeds uint256")
            return lambda f: v
        if isinstance(e, Ident):
            name = e.name
            if name in self._locals:
                return lambda f: f.locals[name]
            if name not in self.state_types:
                raise TypeError(f"unknown identifier {name}")
            return lambda f: f.ctx.storage[name]
        if isinstance(e, Member):
            if e.member == "sender":
                return lambda f: f.ctx.sender
            if e.member == "value":
                return lambda f: f.ctx.value
            return lambda f: f.ctx.balances.get(f.ctx.this, 0)
        if isinstance(e, Index):
            if isinstance(e.base, Index):
                base, k0, k1 = self._expr(e.base.base), self._expr(e.base.index), self._expr(e.index)
                return lambda f: base(f).get(k0(f), _EMPTY).get(k1(f), 0)
            base, k0 = self._expr(e.base), self._expr(e.index)
            return lambda f: base(f).get(k0(f), 0)
        if isinstance(e, Binary):
            left, right = self._expr(e.left), self._expr(e.right)
            op = e.op
            if op == "&&":
                return lambda f: left(f) and right(f)
            if op == "||":
                return lambda f: left(f) or right(f)
            if op in COMPARE:
                cmp = COMPARE[op]
                return lambda f: cmp(left(f), right(f))
            arith = ARITH[op]
            return lambda f: arith(left(f), right(f))
        if isinstance(e, Unary):
            operand = self._expr(e.operand)
            if e.op == "!":
                return lambda f: not operand(f)

            def negate(f: Frame) -> int:
                v = operand(f)
                if v != 0:
                    raise RevertSignal("Underflow")
                return 0

            return negate
        if isinstance(e, CallBuiltin):
            arg = e.args[0]
            if isinstance(arg, Ident) and arg.name == "this":
                return lambda f: f.ctx.this
            v = arg.value
            if v > MAX_ADDRESS:
                raise TypeError("address literal exceeds 160 bits")
            return lambda f: v
        if isinstance(e, CallInternal):
            args = [self._expr(a) for a in e.args]
            name = e.name
            functions = self.functions

            def call(f: Frame):
                _step(f.ctx)
                cf = functions[name]
                return self._invoke(cf, f.ctx, [a(f) for a in args])

            return call
        raise TypeError(f"cannot evaluate {e.kind}")


# ----------------------------------------------------------------- backend


def _type_ok(t: TypeName, v) -> bool:
    if t.name == "bool":
        return isinstance(v, bool)
    if isinstance(v, bool) or not isinstance(v, int):
        return False
    if t.name == "address":
        return 0 <= v <= MAX_ADDRESS
    return 0 <= v <= MAX_UINT


def genesis_balances() -> dict[int, int]:
    return {a: INITIAL_NATIVE for a in ACTORS}


class BuiltinBackend:
    """Deterministic in-process executor with a digest-addressed snapshot table."""

    kind = "builtin"

    def __init__(self, program: Program):
        self.program = program
        self._snapshots: dict[str, WorldState] = {}

    # ``deploy`` runs state initialisers, then the constructor, as ``OWNER``.
    def deploy(self, ctor_args: tuple = (), value: int = 0, deployer: int = OWNER) -> WorldState:
        prog = self.program
        storage = {v.name: v.type_name.default() for v in prog.contract.state_vars}
        balances = genesis_balances()
        ctx = Ctx(storage, balances, deployer, value, CONTRACT_ADDRESS)
        ctx.copied = set(storage)  # fresh dicts, nothing to copy
        try:
            if value:
                self._move_value(ctx, deployer, value)
            init_frame = Frame(ctx, {})
            prog._locals = set()
            for v in prog.contract.state_vars:
                if v.value is not None:
                    storage[v.name] = prog._expr(v.value)(init_frame)
            ctor = prog.functions.get("constructor")
            if ctor is not None:
                self._check_args(ctor, ctor_args)
                prog._invoke(ctor, ctx, list(ctor_args))
            elif ctor_args:
                raise TxTypeError("contract has no constructor")
        except (RevertSignal, CheckerFault) as e:
            raise ConstructorRevert(e.reason) from None
        state = WorldState({prog.name: CONTRACT_ADDRESS}, {prog.name: ctx.storage}, ctx.balances)
        self._snapshots[state.digest] = state
        return state

    @staticmethod
    def _check_args(cf: CompiledFunction, args: tuple) -> None:
        if len(args) != len(cf.param_types):
            raise TxTypeError(f"{cf.node.name} expects {len(cf.param_types)} arguments, got {len(args)}")
        for t, v in zip(cf.param_types, args):
            if not _type_ok(t, v):
                raise TxTypeError(f"argument {v!r} is not a valid {t}")

    @staticmethod
    def _move_value(ctx: Ctx, sender: int, value: int) -> None:
        have = ctx.balances.get(sender, 0)
        if have < value:
            raise RevertSignal("InsufficientBalance")
        ctx.balances[sender] = have - value
        ctx.balances[ctx.this] = ctx.balances.get(ctx.this, 0) + value

    def execute(self, state: WorldState, tx: Transaction) -> ExecResult:
        prog = self.program
        if tx.contract != prog.name or prog.name not in state.registry:
            raise TxTypeError(f"contract {tx.contract} is not deployed")
        cf = prog.functions.get(tx.function)
        if cf is None or not cf.node.callable_externally:
            raise TxTypeError(f"{tx.contract}.{tx.function} is not externally callable")
        self._check_args(cf, tx.args)
        if not 0 <= tx.value <= MAX_UINT:
            raise TxTypeError("value out of range")
        ctx = Ctx(dict(state.storage[prog.name]), dict(state.balances), tx.caller, tx.value, state.registry[prog.name])
        status, reason, ret = OK, None, None
        try:
            if tx.value:
                if not cf.node.payable:
                    raise RevertSignal("NotPayable")
                self._move_value(ctx, tx.caller, tx.value)
            ret = prog._invoke(cf, ctx, list(tx.args))
        except RevertSignal as e:
            status, reason = REVERTED, e.reason
        except CheckerFault as e:
            status, reason = CHECKER_ERROR, e.reason
        if status != OK:
            return ExecResult(status, state, frozenset(ctx.coverage), (), ctx.steps, reason)
        storage = dict(state.storage)
        storage[prog.name] = ctx.storage
        new_state = WorldState(state.registry, storage, ctx.balances)
        alerts = tuple(prog.alert_map.get(a, f"alert#{a}") for a in ctx.alerts)
        return ExecResult(OK, new_state, frozenset(ctx.coverage), alerts, ctx.steps, None, ret, tuple(ctx.events))

    def snapshot(self, state: WorldState) -> str:
        self._snapshots[state.digest] = state
        return state.digest

    def restore(self, digest: str) -> WorldState:
        try:
            return self._snapshots[digest]
        except KeyError:
            raise UnknownDigest(digest) from None

    def close(self) -> None:
        pass
