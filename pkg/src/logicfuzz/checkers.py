"""Invariant-checker templates for the six checker kinds.

A checker is three pieces of MiniSol text: a prelude that captures old
values, an assertion that calls ``__prom_alert`` when the invariant fails,
and (for PriceChange only) persistent state variables.  StatementOrder adds
per-statement markers.  Placement is decided later by the instrumenter.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

from logicfuzz.backend.interpreter import ALERT_EVENT
from logicfuzz.extraction import Characteristic, CriticalVariable, ExtractionResult, load_characteristics
from logicfuzz.frontend.parser import parse_expression
from logicfuzz.frontend.query import NodePath
from logicfuzz.taxonomy import CheckerKind, Finding, checker_kind_for

ALERT_FUNCTION = "__prom_alert"


def render_alert_decl() -> str:
    """Event plus the internal hook every assertion calls."""
    return (
        f"event {ALERT_EVENT}(uint256 id);\n"
        f"function {ALERT_FUNCTION}(uint256 id) internal {{ emit {ALERT_EVENT}(id); }}"
    )


# ---------------------------------------------------------------- thresholds


@dataclass(frozen=True)
class Band:
    lower: Fraction
    upper: Fraction

    def __post_init__(self):
        if not 0 < self.lower < 1 < self.upper:
            raise ValueError(f"band needs 0 < lower < 1 < upper, got {self.lower}, {self.upper}")


@dataclass(frozen=True)
class ShareFloor:
    """Below ``min_supply`` shares, a deposit must receive at least
    ``min_ratio`` of its proportional share of the pool."""

    min_supply: int = 1000
    min_ratio: Fraction = Fraction(9, 10)

    def __post_init__(self):
        if not 0 < self.min_ratio <= 1 or self.min_supply < 0:
            raise ValueError("share floor needs 0 < min_ratio <= 1 and a non-negative min_supply")


@dataclass(frozen=True)
class Thresholds:
    price_band: Band = Band(Fraction(9, 10), Fraction(11, 10))
    rate_band: Band = Band(Fraction(9, 10), Fraction(11, 10))
    share_floor: ShareFloor = ShareFloor()

    @classmethod
    def from_json(cls, data: dict) -> "Thresholds":
        def band(key: str, default: Band) -> Band:
            if key not in data:
                return default
            lo, hi = data[key]
            return Band(Fraction(str(lo)), Fraction(str(hi)))

        floor = cls().share_floor
        if "share_floor" in data:
            sf = data["share_floor"]
            floor = ShareFloor(int(sf.get("min_supply", floor.min_supply)),
                               Fraction(str(sf.get("min_ratio", floor.min_ratio))))
        return cls(band("price_band", cls().price_band), band("rate_band", cls().rate_band), floor)

    @classmethod
    def load(cls, path: str | Path) -> "Thresholds":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls.from_json(data.get("thresholds", data))

    def to_json(self) -> dict:
        f = lambda q: f"{q.numerator}/{q.denominator}"  # noqa: E731
        return {
            "price_band": [f(self.price_band.lower), f(self.price_band.upper)],
            "rate_band": [f(self.rate_band.lower), f(self.rate_band.upper)],
            "share_floor": {"min_supply": self.share_floor.min_supply, "min_ratio": f(self.share_floor.min_ratio)},
        }


# ------------------------------------------------------------------ instances


class UnboundParam(Exception):
    def __init__(self, kind: CheckerKind, role: str):
        self.kind = kind
        self.role = role
        super().__init__(f"{kind.value}: no validated item for the {role!r} role")


class AlertIdCollision(Exception):
    pass


@dataclass(frozen=True)
class CheckerInstance:
    checker_id: str
    alert_id: int
    kind: CheckerKind
    finding: Finding
    contract: str
    function: str
    params: tuple[tuple[str, str], ...]  # (param, access expression)
    prelude: str
    assertion: str
    state_fragment: str = ""
    tracked: tuple[str, ...] = ()  # root names whose writes delimit the checked region
    anchors: tuple[NodePath, ...] = ()  # principal statements
    markers: tuple[tuple[NodePath, str], ...] = ()

    def param(self, name: str) -> Optional[str]:
        return dict(self.params).get(name)

    def to_json(self) -> dict:
        return {
            "checker_id": self.checker_id,
            "alert_id": self.alert_id,
            "kind": self.kind.value,
            "subcategory": self.finding.subcategory.value,
            "contract": self.contract,
            "function": self.function,
            "params": dict(self.params),
            "prelude": self.prelude,
            "assertion": self.assertion,
            "state_fragment": self.state_fragment,
            "markers": [m for _, m in self.markers],
        }


class CheckerRegistry:
    """Hands out run-unique alert ids and refuses duplicates."""

    def __init__(self, start: int = 1):
        self._next = start
        self._alerts: dict[int, str] = {}
        self._ids: set[str] = set()

    def allocate(self) -> int:
        while self._next in self._alerts:
            self._next += 1
        n = self._next
        self._next += 1
        return n

    def register(self, inst: CheckerInstance) -> None:
        if inst.alert_id in self._alerts or inst.checker_id in self._ids:
            raise AlertIdCollision(f"alert id {inst.alert_id} / {inst.checker_id} is already in use")
        self._alerts[inst.alert_id] = inst.checker_id
        self._ids.add(inst.checker_id)

    @property
    def alert_map(self) -> dict[int, str]:
        return dict(self._alerts)


def checker_id_for(kind: CheckerKind, contract: str, function: str, n: int) -> str:
    return f"{kind.value.removesuffix('Checker')}@{contract}.{function}#{n}"


def _p(expr: str) -> str:
    """Parenthesise compound expressions before splicing them into a formula."""
    node = parse_expression(expr)
    return expr if node.kind in ("Ident", "Index", "Member", "IntLit", "CallInternal") else f"({expr})"


def _root_name(expr: str) -> str:
    node = parse_expression(expr)
    while node.kind == "Index":
        node = node.base
    return node.name if node.kind == "Ident" else ""


def _alert(cond: str, n: int) -> str:
    return f"if (!({cond})) {{ {ALERT_FUNCTION}({n}); }}"


@dataclass
class _Binder:
    kind: CheckerKind
    char: Characteristic
    variables: list[CriticalVariable]
    bound: dict[str, str] = field(default_factory=dict)
    direction: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for v in self.variables:
            role = self.char.role(v.role)
            if role is None or role.param is None or role.param in self.bound:
                continue
            self.bound[role.param] = v.access_expr
            if role.direction:
                self.direction[role.param] = role.direction

    def need(self, param: str) -> str:
        if param not in self.bound:
            raise UnboundParam(self.kind, param)
        return _p(self.bound[param])

    def get(self, param: str) -> Optional[str]:
        return _p(self.bound[param]) if param in self.bound else None


def instantiate(
    extraction: ExtractionResult,
    thresholds: Optional[Thresholds] = None,
    registry: Optional[CheckerRegistry] = None,
    characteristics: Optional[dict] = None,
) -> list[CheckerInstance]:
    """Render the checker for the finding's subcategory.

    Raises ``UnboundParam`` when a role the template needs has no validated item.
    """
    thresholds = thresholds or Thresholds()
    registry = registry or CheckerRegistry()
    characteristics = characteristics or load_characteristics()
    finding = extraction.finding
    kind = checker_kind_for(finding.subcategory)
    char = characteristics[finding.subcategory]
    b = _Binder(kind, char, extraction.variables)
    contract = finding.contract_id.rsplit(":", 1)[-1]
    func = finding.function_name
    anchors = tuple(s.path for s in extraction.statements)

    # validate bindings before consuming an id
    builder = _BUILDERS[kind]
    builder(b, thresholds, 0, extraction, dry=True)
    n = registry.allocate()
    parts = builder(b, thresholds, n, extraction, dry=False)
    inst = CheckerInstance(
        checker_id=checker_id_for(kind, contract, func, n),
        alert_id=n,
        kind=kind,
        finding=finding,
        contract=contract,
        function=func,
        params=tuple(sorted(b.bound.items())),
        prelude=parts["prelude"],
        assertion=parts["assertion"],
        state_fragment=parts.get("state", ""),
        tracked=tuple(t for t in parts.get("tracked", ()) if t),
        anchors=parts.get("anchors", anchors),
        markers=parts.get("markers", ()),
    )
    registry.register(inst)
    return [inst]


def _t(n: int, k: int) -> str:
    return f"__prom_{n}_{k}"


def _price_change(b: _Binder, th: Thresholds, n: int, ex, dry: bool) -> dict:
    out, inp = b.need("output"), b.need("input")
    if dry:
        return {}
    last_in, last_out, old_in, old_out = _t(n, 0), _t(n, 1), _t(n, 2), _t(n, 3)
    lo, hi = th.price_band.lower, th.price_band.upper
    cond = (
        f"{old_in} == 0 || {old_out} == 0 || {inp} == 0 || "
        f"({out} * {old_in} * {lo.denominator} >= {old_out} * {inp} * {lo.numerator} && "
        f"{out} * {old_in} * {hi.denominator} <= {old_out} * {inp} * {hi.numerator})"
    )
    return {
        "state": f"uint256 {last_in}; uint256 {last_out};",
        "prelude": f"uint256 {old_in} = {last_in}; uint256 {old_out} = {last_out};",
        "assertion": _alert(cond, n) + f" if ({inp} > 0) {{ {last_in} = {inp}; {last_out} = {out}; }}",
        "tracked": (_root_name(b.bound["output"]),),
    }


def _exchange_rate(b: _Binder, th: Thresholds, n: int, ex, dry: bool) -> dict:
    inp, out, rate = b.need("input"), b.need("output"), b.need("rate")
    if dry:
        return {}
    r = _t(n, 0)
    lo, hi = th.rate_band.lower, th.rate_band.upper
    cond = (
        f"{out} * {lo.denominator} >= {inp} * {r} * {lo.numerator} && "
        f"{out} * {hi.denominator} <= {inp} * {r} * {hi.numerator}"
    )
    return {
        "prelude": f"uint256 {r} = {rate};",
        "assertion": _alert(cond, n),
        "tracked": (_root_name(b.bound["output"]),),
    }


def _token_change(b: _Binder, th: Thresholds, n: int, ex, dry: bool) -> dict:
    tracked, amount = b.need("tracked"), b.need("amount")
    if dry:
        return {}
    old = _t(n, 0)
    if b.direction.get("tracked", "debit") == "credit":
        cond = f"{tracked} >= {old} && {tracked} - {old} == {amount}"
    else:
        cond = f"{old} >= {amount} && {old} - {amount} == {tracked}"
    return {
        "prelude": f"uint256 {old} = {tracked};",
        "assertion": _alert(cond, n),
        "tracked": (_root_name(b.bound["tracked"]),),
    }


def _share_safety(b: _Binder, th: Thresholds, n: int, ex, dry: bool) -> dict:
    minted, assets, shares, deposit = b.need("minted"), b.need("total_assets"), b.need("total_shares"), b.need("deposit")
    if dry:
        return {}
    a_pre, s_pre = _t(n, 0), _t(n, 1)
    floor = th.share_floor
    q = floor.min_ratio
    cond = (
        f"{s_pre} >= {floor.min_supply} || "
        f"{minted} * {a_pre} * {q.denominator} >= {deposit} * {s_pre} * {q.numerator}"
    )
    return {
        "prelude": f"uint256 {a_pre} = {assets}; uint256 {s_pre} = {shares};",
        "assertion": _alert(cond, n),
        "tracked": tuple(_root_name(b.bound[k]) for k in ("minted", "total_assets", "total_shares")),
    }


def _statement_order(b: _Binder, th: Thresholds, n: int, ex: ExtractionResult, dry: bool) -> dict:
    order = b.char.order or ("checkpoint_update", "state_update")
    first_role, second_role = order[0], order[1]
    firsts = [s for s in ex.statements if s.role == first_role]
    seconds = [s for s in ex.statements if s.role == second_role]
    if not firsts:
        raise UnboundParam(b.kind, first_role)
    if not seconds:
        raise UnboundParam(b.kind, second_role)
    if dry:
        return {}
    clock, t1, t2 = _t(n, 0), _t(n, 1), _t(n, 2)
    markers = tuple(
        (s.path, f"{clock} += 1; if ({t} == 0) {{ {t} = {clock}; }}")
        for group, t in ((firsts, t1), (seconds, t2))
        for s in group
    )
    return {
        "prelude": f"uint256 {clock} = 0; uint256 {t1} = 0; uint256 {t2} = 0;",
        "assertion": _alert(f"{t2} == 0 || ({t1} != 0 && {t1} < {t2})", n),
        "anchors": tuple(s.path for s in firsts + seconds),
        "markers": markers,
    }


def _state_change(b: _Binder, th: Thresholds, n: int, ex, dry: bool) -> dict:
    guarded = b.need("guarded")
    lock, authority = b.get("lock"), b.get("authority")
    if lock is None and authority is None:
        raise UnboundParam(b.kind, "lock or authority")
    clauses = []
    if lock is not None:
        amount = b.need("amount")
        clauses.append(f"({guarded} >= {lock} && {guarded} - {lock} >= {amount})")
    if authority is not None:
        clauses.append(f"msg.sender == {authority}")
    if dry:
        return {}
    old, ok = _t(n, 0), _t(n, 1)
    return {
        "prelude": f"uint256 {old} = {guarded}; bool {ok} = {' && '.join(clauses)};",
        "assertion": _alert(f"{guarded} == {old} || {ok}", n),
        "tracked": (_root_name(b.bound["guarded"]),),
    }


_BUILDERS = {
    CheckerKind.PriceChange: _price_change,
    CheckerKind.ExchangeRate: _exchange_rate,
    CheckerKind.TokenChange: _token_change,
    CheckerKind.ShareSafety: _share_safety,
    CheckerKind.StatementOrder: _statement_order,
    CheckerKind.StateChange: _state_change,
}
