"""Prompt templates with ``[%Slot Name%]`` markers."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping

SLOT_RE = re.compile(r"\[%([^%\[\]]+)%\]")


class MissingSlot(KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(name)

    def __str__(self) -> str:
        return f"template slot [%{self.name}%] is not bound"


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    role_preamble: str
    body: str
    slots: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.slots:
            found = tuple(dict.fromkeys(SLOT_RE.findall(self.role_preamble + self.body)))
            object.__setattr__(self, "slots", found)


def render(t: PromptTemplate, bindings: Mapping[str, str]) -> str:
    """Substitute every slot in one pass; bound values are inserted verbatim."""
    for name in t.slots:
        if name not in bindings:
            raise MissingSlot(name)

    def sub(m: re.Match) -> str:
        name = m.group(1)
        if name not in bindings:
            raise MissingSlot(name)
        return bindings[name]

    text = t.body if not t.role_preamble else t.role_preamble + "\n\n" + t.body
    return SLOT_RE.sub(sub, text)


_AUDITOR_ROLE = (
    "You review Solidity code for business-logic defects. Read the code carefully and "
    "answer the question about the named function only."
)

_ATTACKER_ROLE = (
    "You are a security tester with permission to probe this contract. Decide whether an "
    "adversary could make the named function behave in a way that benefits them."
)

_ANSWER_RULE = "End your reply with a single line of the form `ANSWER: yes` or `ANSWER: no`."

AUDITOR_SCENARIO = PromptTemplate(
    "auditor.scenario",
    _AUDITOR_ROLE,
    "Contract code under review:\n```solidity\n[%Code%]\n```\n\n"
    "Question: does the function described above implement the following functionality?\n"
    "[%Scenario%]\n\n" + _ANSWER_RULE,
)

AUDITOR_PROPERTY = PromptTemplate(
    "auditor.property",
    _AUDITOR_ROLE,
    "Contract code under review:\n```solidity\n[%Code%]\n```\n\n"
    "The function implements this functionality: [%Scenario%]\n"
    "Question: does the code also show the following attribute or operation?\n"
    "[%Property%]\n\n" + _ANSWER_RULE,
)

ATTACKER_FEATURE = PromptTemplate(
    "attacker.feature",
    _ATTACKER_ROLE,
    "Target code:\n```solidity\n[%Code%]\n```\n\n"
    "Question: does the function exhibit this exploitable feature?\n[%Feature%]\n\n" + _ANSWER_RULE,
)

ATTACKER_MODEL = PromptTemplate(
    "attacker.model",
    _ATTACKER_ROLE,
    "Target code:\n```solidity\n[%Code%]\n```\n\n"
    "You noticed this feature: [%Feature%]\n"
    "Attack model: [%Attack Model%]\n"
    "Question: can an attacker following this model actually exploit the function?\n\n" + _ANSWER_RULE,
)

EXTRACTION = PromptTemplate(
    "extraction",
    "You are helping to write runtime invariant checks for a smart contract function that "
    "is suspected of a [%Bug%] bug.",
    "Function and its helpers:\n```solidity\n[%Code%]\n```\n\n"
    "List the critical variables. For this bug class they are: [%Critical Variable%]\n"
    "List the principal statements. For this bug class they are: [%Principal Statement%]\n\n"
    "Reply with one item per line and nothing else:\n"
    "VARIABLE: <expression exactly as it can be written inside the function> | <role>\n"
    "STATEMENT: <statement copied verbatim from the code> | <role>\n"
    "Allowed roles: [%Roles%]\n"
    "Reply with the single line NONE if the function has no such items.",
)

TEMPLATES = {t.template_id: t for t in (AUDITOR_SCENARIO, AUDITOR_PROPERTY, ATTACKER_FEATURE, ATTACKER_MODEL, EXTRACTION)}
