"""Language-model gateway: templates, clients and majority voting."""

from logicfuzz.llm.clients import LiveClient, ModelClientConfig, ReplayClient, ScriptedClient, make_client
from logicfuzz.llm.gateway import (
    ClientError,
    FixtureMiss,
    Gateway,
    MajorityAnswer,
    ScriptItem,
    Transcript,
    majority,
    parse_answer,
    prompt_digest,
    record_session,
)
from logicfuzz.llm.templates import MissingSlot, PromptTemplate, render

__all__ = [
    "ClientError",
    "FixtureMiss",
    "Gateway",
    "LiveClient",
    "MajorityAnswer",
    "MissingSlot",
    "ModelClientConfig",
    "PromptTemplate",
    "ReplayClient",
    "ScriptItem",
    "ScriptedClient",
    "Transcript",
    "majority",
    "make_client",
    "parse_answer",
    "prompt_digest",
    "record_session",
    "render",
]
