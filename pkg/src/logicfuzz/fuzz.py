"""Alert-guided transaction-sequence fuzzing.

Two corpora drive the loop: world states to start from, and (transaction,
pre-state) pairs that reached new coverage.  Each iteration picks a state by
energy, builds a short mutated sequence, executes it and records any checker
alert as a violation with a minimised reproducer.
"""

from __future__ import annotations

import bisect
import hashlib
import logging
import math
import random
from dataclasses import dataclass, field
from itertools import accumulate
from typing import Any, Callable, Optional

from logicfuzz.backend.state import (
    ACTORS,
    ATTACKER,
    CONTRACT_ADDRESS,
    MAX_ADDRESS,
    MAX_UINT,
    BackendError,
    ConstructorRevert,
    ExecResult,
    Transaction,
)
from logicfuzz.frontend.nodes import ContractDef, FunctionDef, IntLit, TypeName
from logicfuzz.frontend.query import callees
from logicfuzz.taxonomy import CheckerKind, Subcategory, ViolationReport

log = logging.getLogger(__name__)

BOUNDARY = (0, 1, 2) + tuple(10**k for k in range(1, 25)) + (MAX_UINT,)
OPERATORS = ("fresh", "replace_arg", "insert_call", "delete_call", "swap_order", "splice", "havoc")
MAX_LINEAGE = 64


class DeployFailure(Exception):
    pass


@dataclass
class CampaignConfig:
    seed: int = 42
    budget: int = 100_000
    stop_on_first: bool = True
    target_weight: float = 10.0
    max_sequence: int = 8
    corpus_cap: int = 2048
    operator_weights: dict[str, float] = field(
        default_factory=lambda: {"fresh": 1, "replace_arg": 3, "insert_call": 2, "delete_call": 1,
                                 "swap_order": 1, "splice": 1, "havoc": 2}
    )

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be non-negative")
        if self.target_weight <= 0 or any(w <= 0 for w in self.operator_weights.values()):
            raise ValueError("weights must be positive")
        unknown = set(self.operator_weights) - set(OPERATORS)
        if unknown:
            raise ValueError(f"unknown mutation operators: {sorted(unknown)}")
        if not 1 <= self.max_sequence:
            raise ValueError("max_sequence must be at least 1")


def derive_seed(master: int, label: str) -> int:
    """Independent 64-bit stream per campaign, derived from the master seed."""
    return int.from_bytes(hashlib.sha256(f"{master}:{label}".encode()).digest()[:8], "big")


def energy(hits: int) -> float:
    return 1.0 + math.log2(1 + hits)


@dataclass
class StateEntry:
    state: Any
    lineage: tuple[Transaction, ...]  # successful transactions from genesis
    hits: int = 0

    @property
    def energy(self) -> float:
        return energy(self.hits)


@dataclass
class CorpusEntry:
    state_digest: str
    tx: Transaction
    coverage: frozenset
    provenance: str  # seed | mutated
    hits: int = 0

    @property
    def energy(self) -> float:
        return energy(self.hits)


class WeightedPool:
    """Energy-weighted sampling with a lazily rebuilt cumulative table."""

    def __init__(self):
        self.items: list = []
        self._cum: Optional[list[float]] = None

    def __len__(self) -> int:
        return len(self.items)

    def add(self, item) -> None:
        self.items.append(item)
        if self._cum is not None:
            self._cum.append((self._cum[-1] if self._cum else 0.0) + item.energy)

    def touched(self) -> None:
        self._cum = None

    def pick(self, rng: random.Random):
        if self._cum is None:
            self._cum = list(accumulate(i.energy for i in self.items))
        x = rng.random() * self._cum[-1]
        return self.items[min(bisect.bisect_right(self._cum, x), len(self.items) - 1)]

    def shrink(self, cap: int, keep_first: bool = True) -> None:
        """Drop the lowest-energy quarter (oldest first among equals) once over ``cap``."""
        if len(self.items) <= cap:
            return
        start = 1 if keep_first else 0
        ranked = sorted(range(start, len(self.items)), key=lambda i: (self.items[i].energy, i))
        drop = set(ranked[: max(1, len(self.items) - (cap * 3) // 4)])
        self.items = [x for i, x in enumerate(self.items) if i not in drop]
        self._cum = None


@dataclass(frozen=True)
class Signature:
    name: str
    types: tuple[TypeName, ...]
    payable: bool
    target: bool


def signatures(contract: ContractDef, checker_functions: set[str]) -> list[Signature]:
    """Externally callable functions; a function is a target when its call graph reaches checker code."""
    out = []
    for f in contract.functions:
        if not f.callable_externally:
            continue
        reach = {f.name} | {c.name for c in callees(contract, f)}
        out.append(Signature(f.name, tuple(p.type_name for p in f.params), f.payable, bool(reach & checker_functions)))
    return out


def _dictionary(contract: ContractDef) -> list[int]:
    values = {n.value for n in contract.walk() if isinstance(n, IntLit) and 0 <= n.value <= MAX_UINT}
    return sorted(values)


def _scalars(state, contract: str) -> list[int]:
    """Non-zero integer state variables, usable as argument material; opaque handles give none."""
    storage = getattr(state, "storage", None)
    if not storage:
        return []
    vars_ = storage.get(contract, {})
    return [v for _, v in sorted(vars_.items()) if isinstance(v, int) and not isinstance(v, bool) and 0 < v <= MAX_UINT]


class Mutator:
    def __init__(self, sigs: list[Signature], contract_name: str, rng: random.Random, cfg: CampaignConfig,
                 dictionary: list[int]):
        self.sigs = sigs
        self.contract = contract_name
        self.rng = rng
        self.cfg = cfg
        self.dictionary = dictionary or [0]
        self.context: list[int] = []  # scalar storage values of the current base state
        self._cum = list(accumulate(cfg.target_weight if s.target else 1.0 for s in sigs))
        self._ops = list(cfg.operator_weights)
        self._op_cum = list(accumulate(cfg.operator_weights[o] for o in self._ops))

    def pick_function(self) -> Signature:
        x = self.rng.random() * self._cum[-1]
        return self.sigs[min(bisect.bisect_right(self._cum, x), len(self.sigs) - 1)]

    def uint(self) -> int:
        r, rng = self.rng.random(), self.rng
        if r < 0.45:
            return rng.choice(BOUNDARY)
        if r < 0.7:
            return rng.randrange(0, 1001)
        if r < 0.8:
            return rng.choice(self.dictionary)
        if r < 0.92 and self.context:
            v = rng.choice(self.context)
            return (v, v + 1, max(v - 1, 0), v * 2, v // 2)[rng.randrange(5)] & MAX_UINT
        return rng.getrandbits(rng.randrange(1, 257))

    def value_of(self, t: TypeName):
        if t.name == "bool":
            return self.rng.random() < 0.5
        if t.name == "address":
            r = self.rng.random()
            if r < 0.9:
                return self.rng.choice(ACTORS)
            return 0 if r < 0.95 else CONTRACT_ADDRESS
        return self.uint()

    def caller(self) -> int:
        return ATTACKER if self.rng.random() < 0.4 else self.rng.choice(ACTORS)

    def msg_value(self, sig: Signature) -> int:
        if not sig.payable or self.rng.random() < 0.3:
            return 0
        r = self.rng.random()
        if r < 0.45:
            return self.rng.choice(BOUNDARY[:25])
        if r < 0.7 and self.context:
            v = self.rng.choice(self.context)
            return min((v, v + 1, v * 2, v // 2)[self.rng.randrange(4)], 10**24)
        return self.rng.randrange(0, 1001)

    def fresh(self) -> Transaction:
        sig = self.pick_function()
        args = tuple(self.value_of(t) for t in sig.types)
        return Transaction(self.caller(), self.contract, sig.name, args, self.msg_value(sig))

    def _havoc_int(self, v: int, bound: int) -> int:
        op = self.rng.randrange(5)
        if op == 0:
            v = v + 1
        elif op == 1:
            v = v - 1
        elif op == 2:
            v = v * 2
        elif op == 3:
            v = v // 2
        else:
            v = self.uint()
        return min(max(v, 0), bound)

    def replace_arg(self, tx: Transaction) -> Transaction:
        sig = next(s for s in self.sigs if s.name == tx.function)
        slots = len(tx.args) + 1 + (1 if sig.payable else 0)
        i = self.rng.randrange(slots)
        if i < len(tx.args):
            args = list(tx.args)
            t = sig.types[i]
            if t.name == "uint256" and self.rng.random() < 0.5:
                args[i] = self._havoc_int(args[i], MAX_UINT)
            else:
                args[i] = self.value_of(t)
            return Transaction(tx.caller, tx.contract, tx.function, tuple(args), tx.value)
        if i == len(tx.args):
            return Transaction(self.caller(), tx.contract, tx.function, tx.args, tx.value)
        value = self._havoc_int(tx.value, 10**24) if self.rng.random() < 0.5 else self.msg_value(sig)
        return Transaction(tx.caller, tx.contract, tx.function, tx.args, value)

    def apply(self, op: str, seq: list[Transaction], splice_from: Callable[[], Optional[Transaction]]) -> list[Transaction]:
        rng, cap = self.rng, self.cfg.max_sequence
        if op == "fresh":
            return [self.fresh() for _ in range(rng.randint(1, cap))]
        if op == "replace_arg" and seq:
            i = rng.randrange(len(seq))
            return seq[:i] + [self.replace_arg(seq[i])] + seq[i + 1:]
        if op == "insert_call" and len(seq) < cap:
            i = rng.randint(0, len(seq))
            return seq[:i] + [self.fresh()] + seq[i:]
        if op == "delete_call" and len(seq) > 1:
            i = rng.randrange(len(seq))
            return seq[:i] + seq[i + 1:]
        if op == "swap_order" and len(seq) > 1:
            i, j = rng.randrange(len(seq)), rng.randrange(len(seq))
            seq = list(seq)
            seq[i], seq[j] = seq[j], seq[i]
            return seq
        if op == "splice" and len(seq) < cap:
            tx = splice_from()
            if tx is not None:
                i = rng.randint(0, len(seq))
                return seq[:i] + [tx] + seq[i:]
        if op == "havoc":
            for _ in range(rng.randint(2, 4)):
                seq = self.apply(self.pick_op(exclude_havoc=True), seq, splice_from) or seq
            return seq
        return seq

    def pick_op(self, exclude_havoc: bool = False) -> str:
        while True:
            x = self.rng.random() * self._op_cum[-1]
            op = self._ops[min(bisect.bisect_right(self._op_cum, x), len(self._ops) - 1)]
            if not (exclude_havoc and op == "havoc"):
                return op


@dataclass
class CampaignResult:
    violations: list[ViolationReport]
    executions: int
    coverage: int
    corpus_sizes: list[tuple[int, int, int]]  # (executions, states, pairs)
    minimization_executions: int = 0
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "violations": [v.to_json() for v in self.violations],
            "executions": self.executions,
            "coverage": self.coverage,
            "corpus_sizes": [list(x) for x in self.corpus_sizes],
            "minimization_executions": self.minimization_executions,
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class CheckerInfo:
    checker_id: str
    subcategory: Subcategory
    kind: CheckerKind
    function: str


class Campaign:
    """One deterministic campaign against one deployed contract."""

    def __init__(self, contract: ContractDef, backend, cfg: CampaignConfig, checkers: list[CheckerInfo],
                 ctor_args: tuple = ()):
        self.contract = contract
        self.backend = backend
        self.cfg = cfg
        self.checkers = {c.checker_id: c for c in checkers}
        self.rng = random.Random(cfg.seed)
        self.sigs = signatures(contract, {c.function for c in checkers})
        self.mutator = Mutator(self.sigs, contract.name, self.rng, cfg, _dictionary(contract)) if self.sigs else None
        self.ctor_args = ctor_args
        self.states = WeightedPool()
        self.pairs = WeightedPool()
        self.seen: set[str] = set()
        self.coverage: set = set()
        self.executions = 0
        self.min_executions = 0
        self.found: dict[str, ViolationReport] = {}
        self.sizes: list[tuple[int, int, int]] = []
        self.warnings: list[str] = []
        self.genesis = None

    # ------------------------------------------------------------ seeding

    def deploy(self):
        try:
            self.genesis = self.backend.deploy(self.ctor_args)
        except ConstructorRevert as e:
            raise DeployFailure(f"{self.contract.name}: {e}") from None
        return self.genesis

    def _seed_args(self, sig: Signature, k: int) -> tuple[tuple, int]:
        def pick(t: TypeName):
            if t.name == "bool":
                return k == 1
            if t.name == "address":
                return ACTORS[(k + 1) % len(ACTORS)]
            return (0, 1)[k] if k < 2 else self.rng.choice(BOUNDARY)
        value = 0
        if sig.payable:
            value = (0, 1)[k] if k < 2 else self.rng.choice(BOUNDARY[:25])
        return tuple(pick(t) for t in sig.types), value

    def seed_corpora(self) -> None:
        """Genesis plus the state after each single boundary-argument call from genesis."""
        genesis = self.genesis if self.genesis is not None else self.deploy()
        root = StateEntry(genesis, ())
        self.states.add(root)
        self.seen.add(genesis.digest)
        if not self.sigs:
            self.warnings.append(f"{self.contract.name} has no externally callable functions")
            return
        for sig in self.sigs:
            for k in range(3):
                if self._exhausted():
                    return
                args, value = self._seed_args(sig, k)
                tx = Transaction(ATTACKER, self.contract.name, sig.name, args, value)
                self._execute_sequence(root, [tx], provenance="seed")

    # ------------------------------------------------------------ loop

    def _exhausted(self) -> bool:
        if self.executions >= self.cfg.budget:
            return True
        return self.cfg.stop_on_first and bool(self.checkers) and len(self.found) == len(self.checkers)

    def mutate(self) -> tuple[StateEntry, list[Transaction]]:
        base = self.states.pick(self.rng)
        m = self.mutator
        m.context = _scalars(base.state, self.contract.name)
        if len(self.pairs) and self.rng.random() < 0.7:
            seq = [self.pairs.pick(self.rng).tx]
        else:
            seq = [m.fresh()]
        for _ in range(self.rng.randint(1, 3)):
            seq = m.apply(m.pick_op(), seq, self._splice) or [m.fresh()]
        return base, seq[: self.cfg.max_sequence]

    def _splice(self) -> Optional[Transaction]:
        return self.pairs.pick(self.rng).tx if len(self.pairs) else None

    def _execute_sequence(self, base: StateEntry, seq: list[Transaction], provenance: str = "mutated") -> None:
        state, lineage = base.state, base.lineage
        for tx in seq:
            if self._exhausted():
                return
            pre = state
            r: ExecResult = self.backend.execute(state, tx)
            self.executions += 1
            if self.executions % max(1, self.cfg.budget // 10) == 0:
                self.sizes.append((self.executions, len(self.states), len(self.pairs)))
            new_cov = not r.coverage <= self.coverage
            if new_cov:
                self.coverage |= r.coverage
                base.hits += 1
                self.states.touched()
                self.pairs.add(CorpusEntry(pre.digest, tx, r.coverage, provenance))
                self.pairs.shrink(self.cfg.corpus_cap, keep_first=False)
            if not r.ok:
                continue
            state = r.new_state
            lineage = lineage + (tx,)
            for cid in r.alerts:
                if cid in self.checkers and cid not in self.found:
                    self._record(cid, lineage)
            digest = state.digest
            if digest not in self.seen:
                self.seen.add(digest)
                if new_cov or len(lineage) <= MAX_LINEAGE:
                    self.states.add(StateEntry(state, lineage))
                    self.states.shrink(self.cfg.corpus_cap)

    def run(self) -> CampaignResult:
        if self.cfg.budget == 0:
            return self._result()
        self.seed_corpora()
        if not self.sigs:
            log.warning("%s: nothing to fuzz", self.contract.name)
            return self._result()
        while not self._exhausted():
            base, seq = self.mutate()
            self._execute_sequence(base, seq)
        return self._result()

    def _result(self) -> CampaignResult:
        violations = sorted(self.found.values(), key=lambda v: v.checker_id)
        return CampaignResult(violations, self.executions, len(self.coverage), list(self.sizes),
                              self.min_executions, list(self.warnings))

    # ------------------------------------------------------------ violations

    def _fires(self, seq: tuple[Transaction, ...], cid: str) -> Optional[int]:
        """Index of the first transaction raising ``cid`` when replayed from genesis."""
        state = self.genesis
        for i, tx in enumerate(seq):
            r = self.backend.execute(state, tx)
            self.min_executions += 1
            if r.ok:
                if cid in r.alerts:
                    return i
                state = r.new_state
        return None

    def minimize(self, seq: tuple[Transaction, ...], cid: str) -> tuple[Transaction, ...]:
        """Greedy removal of chunks, then of single transactions, keeping the alert."""
        hit = self._fires(seq, cid)
        if hit is None:
            return seq
        seq = seq[: hit + 1]
        chunk = max(1, len(seq) // 2)
        while True:
            changed, i = False, 0
            while i < len(seq) and len(seq) > 1:
                cand = seq[:i] + seq[i + chunk:]
                hit = self._fires(cand, cid) if cand else None
                if hit is not None:
                    seq, changed = cand[: hit + 1], True
                else:
                    i += chunk
            if chunk > 1:
                chunk = max(1, chunk // 2)
            elif not changed:
                return seq

    def _record(self, cid: str, lineage: tuple[Transaction, ...]) -> None:
        found_at = self.executions
        repro = self.minimize(lineage, cid)
        results = replay(self.backend, self.genesis, repro)
        pre = results[-2].new_state if len(results) > 1 else self.genesis
        info = self.checkers[cid]
        self.found[cid] = ViolationReport(
            checker_id=cid,
            subcategory=info.subcategory,
            reproducer=repro,
            pre_state_digest=pre.digest,
            post_state_digest=results[-1].new_state.digest,
            executions_until_violation=found_at,
            function_name=info.function,
            kind=info.kind,
        )


def replay(backend, genesis, reproducer) -> list[ExecResult]:
    """Execute a reproducer from genesis; reverted steps leave the state unchanged."""
    state, out = genesis, []
    for tx in reproducer:
        r = backend.execute(state, tx)
        out.append(r)
        if r.ok:
            state = r.new_state
    return out


def run(contract: ContractDef, backend, cfg: CampaignConfig, checkers: list[CheckerInfo]) -> CampaignResult:
    try:
        return Campaign(contract, backend, cfg, checkers).run()
    except BackendError as e:
        if isinstance(e, ConstructorRevert):
            raise DeployFailure(str(e)) from None
        raise


def checkers_for(manifest, contract: str) -> list[CheckerInfo]:
    return [
        CheckerInfo(e.checker_id, Subcategory(e.subcategory), CheckerKind(e.kind), e.function)
        for e in manifest
        if e.contract == contract
    ]


__all__ = [
    "BOUNDARY",
    "Campaign",
    "CampaignConfig",
    "CampaignResult",
    "CheckerInfo",
    "CorpusEntry",
    "DeployFailure",
    "MAX_ADDRESS",
    "Mutator",
    "StateEntry",
    "checkers_for",
    "derive_seed",
    "replay",
    "run",
    "signatures",
]
