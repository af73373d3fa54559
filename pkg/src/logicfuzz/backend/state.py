"""World state, transactions and execution results shared by all backends."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Optional, Union

MAX_UINT = 2**256 - 1
MAX_ADDRESS = 2**160 - 1

# Synthetic address space used for deployment and fuzzing.
ATTACKER = 0xA11CE00000000000000000000000000000000001
VICTIM = 0xB0B0000000000000000000000000000000000002
POOL = 0x9001000000000000000000000000000000000003
OWNER = 0x0E0E000000000000000000000000000000000004
SPARES = tuple(0x5A5A000000000000000000000000000000000000 + i for i in range(5, 9))
ACTORS = (ATTACKER, VICTIM, POOL, OWNER) + SPARES
ACTOR_NAMES = dict(zip(ACTORS, ["attacker", "victim", "pool", "owner", "spare1", "spare2", "spare3", "spare4"]))
CONTRACT_ADDRESS = 0xC0DE000000000000000000000000000000000C0D
INITIAL_NATIVE = 10**30

Value = Union[int, bool]


class BackendError(Exception):
    pass


class ConstructorRevert(BackendError):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"constructor reverted: {reason}")


class UnknownDigest(BackendError):
    def __init__(self, digest: str):
        self.digest = digest
        super().__init__(f"unknown state digest {digest}")


class TxTypeError(BackendError, TypeError):
    """The transaction does not match the callee's signature."""


class BackendCrash(BackendError):
    pass


def _canon(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _canon(v) for k, v in sorted(value.items())}
    if isinstance(value, bool):
        return value
    if isinstance(value, int):
        return str(value)
    return value


@dataclass(eq=False)
class WorldState:
    """Immutable by convention: backends build a new state per transaction.

    ``storage`` maps contract name to its variables; mappings are sparse dicts
    with zero entries removed so that equal states have equal digests.
    """

    registry: dict[str, int]
    storage: dict[str, dict[str, Any]]
    balances: dict[int, int]
    _digest: Optional[str] = field(default=None, repr=False)

    @property
    def digest(self) -> str:
        if self._digest is None:
            doc = {"registry": _canon(self.registry), "storage": _canon(self.storage), "balances": _canon(self.balances)}
            blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
            self._digest = hashlib.sha256(blob.encode()).hexdigest()
        return self._digest

    def __eq__(self, other) -> bool:
        return isinstance(other, WorldState) and self.digest == other.digest

    def __hash__(self) -> int:
        return hash(self.digest)

    def var(self, contract: str, name: str) -> Any:
        return self.storage[contract][name]

    def balance_of(self, address: int) -> int:
        return self.balances.get(address, 0)


@dataclass(frozen=True)
class StateHandle:
    """Opaque reference to a state held by an out-of-process backend."""

    digest: str


@dataclass(frozen=True)
class Transaction:
    caller: int
    contract: str
    function: str
    args: tuple[Value, ...] = ()
    value: int = 0

    def to_json(self) -> dict:
        return {
            "caller": hex(self.caller),
            "contract": self.contract,
            "function": self.function,
            "args": [a if isinstance(a, bool) else str(a) for a in self.args],
            "value": str(self.value),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Transaction":
        args = tuple(a if isinstance(a, bool) else int(a, 0) for a in data["args"])
        return cls(int(data["caller"], 16), data["contract"], data["function"], args, int(data["value"]))

    def describe(self) -> str:
        who = ACTOR_NAMES.get(self.caller, hex(self.caller))
        args = ", ".join(str(a).lower() if isinstance(a, bool) else _short(a) for a in self.args)
        suffix = f" {{value: {self.value}}}" if self.value else ""
        return f"{who} -> {self.contract}.{self.function}({args}){suffix}"


def _short(a: int) -> str:
    if a in ACTOR_NAMES:
        return ACTOR_NAMES[a]
    return str(a)


OK = "Ok"
REVERTED = "Reverted"
CHECKER_ERROR = "CheckerError"


@dataclass(frozen=True)
class ExecResult:
    status: str
    new_state: Any  # WorldState (builtin) or StateHandle (external)
    coverage: frozenset[tuple[int, int]]
    alerts: tuple[str, ...]
    gas_units: int
    reason: Optional[str] = None
    return_value: Optional[Value] = None
    events: tuple[tuple[str, tuple[Value, ...]], ...] = ()

    @property
    def ok(self) -> bool:
        return self.status == OK
