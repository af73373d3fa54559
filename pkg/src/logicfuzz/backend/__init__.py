"""Execution backends: the built-in interpreter and the external protocol client."""

from logicfuzz.backend.state import (
    ACTORS,
    ATTACKER,
    CONTRACT_ADDRESS,
    OWNER,
    POOL,
    VICTIM,
    BackendCrash,
    BackendError,
    ConstructorRevert,
    ExecResult,
    StateHandle,
    Transaction,
    TxTypeError,
    UnknownDigest,
    WorldState,
)

__all__ = [
    "ACTORS",
    "ATTACKER",
    "CONTRACT_ADDRESS",
    "OWNER",
    "POOL",
    "VICTIM",
    "BackendCrash",
    "BackendError",
    "ConstructorRevert",
    "ExecResult",
    "StateHandle",
    "Transaction",
    "TxTypeError",
    "UnknownDigest",
    "WorldState",
]
