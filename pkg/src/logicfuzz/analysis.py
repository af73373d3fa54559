"""Dual-agent analysis: Auditor and Attacker question flows plus result fusion."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path, PurePosixPath
from typing import Iterable, Optional

from logicfuzz.frontend.nodes import ContractDef, FunctionDef, SourceUnit
from logicfuzz.frontend.query import callees
from logicfuzz.frontend.tolerant import SpanUnit
from logicfuzz.llm.gateway import Gateway, approx_tokens
from logicfuzz.llm.templates import ATTACKER_FEATURE, ATTACKER_MODEL, AUDITOR_PROPERTY, AUDITOR_SCENARIO, render
from logicfuzz.taxonomy import (
    PRECEDENCE,
    Finding,
    PrimaryCategory,
    Provenance,
    Subcategory,
    parent_category,
    subcategories_of,
)

log = logging.getLogger(__name__)

ATTACKER_ONLY_CONFIDENCE = Fraction(1, 2)


@dataclass(frozen=True)
class ScenarioPropertyEntry:
    subcategory: Subcategory
    scenario_text: str
    property_text: str


@dataclass(frozen=True)
class FeatureAttackEntry:
    primary: PrimaryCategory
    feature_text: str
    attack_model_text: str


@dataclass(frozen=True)
class Knowledge:
    scenarios: dict[Subcategory, ScenarioPropertyEntry]
    features: dict[PrimaryCategory, FeatureAttackEntry]

    @classmethod
    def from_json(cls, data: dict) -> "Knowledge":
        subs = data.get("subcategories", {})
        prims = data.get("primaries", {})
        missing = [s.value for s in Subcategory if s.value not in subs]
        missing += [p.value for p in PrimaryCategory if p.value not in prims]
        if missing:
            raise ValueError(f"knowledge file lacks entries for {', '.join(missing)}")
        scenarios = {
            s: ScenarioPropertyEntry(s, subs[s.value]["scenario"], subs[s.value]["property"]) for s in Subcategory
        }
        features = {
            p: FeatureAttackEntry(p, prims[p.value]["feature"], prims[p.value]["attack_model"])
            for p in PrimaryCategory
        }
        return cls(scenarios, features)

    @classmethod
    def load(cls, path: Optional[str | Path] = None) -> "Knowledge":
        if path is None:
            text = resources.files("logicfuzz.data").joinpath("knowledge.json").read_text(encoding="utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        return cls.from_json(json.loads(text))


@dataclass(frozen=True)
class AgentVerdict:
    contract_id: str
    function_id: int
    function_name: str
    agent: Provenance  # Auditor or Attacker
    label: str  # Subcategory value for the Auditor, PrimaryCategory value for the Attacker
    votes: int
    samples: int

    def __post_init__(self):
        if self.agent == Provenance.Auditor:
            Subcategory(self.label)
        elif self.agent == Provenance.Attacker:
            PrimaryCategory(self.label)
        else:
            raise ValueError("verdicts come from the Auditor or the Attacker")


@dataclass
class AnalysisConfig:
    token_budget: int = 6000
    auditor_samples: int = 5
    attacker_samples: int = 1
    scope: frozenset[Subcategory] = frozenset(Subcategory)


@dataclass(frozen=True)
class SkippedFunction:
    contract_id: str
    function_name: str
    reason: str


def contract_id_of(unit: SourceUnit, contract: ContractDef) -> str:
    return f"{unit.path}:{contract.name}"


def code_slot(unit: SourceUnit, contract: ContractDef, func: FunctionDef) -> str:
    """The code shown to the model: a header naming the function, the state
    variables, the function itself, then every internal function it reaches."""
    parts = [f"// function under review: {contract.name}.{func.name}"]
    parts += [unit.text_of(v) for v in contract.state_vars]
    parts.append("")
    parts.append(unit.text_of(func))
    for callee in callees(contract, func):
        parts.append("")
        parts.append(unit.text_of(callee))
    return "\n".join(parts)


def analysable(contract: ContractDef) -> list[FunctionDef]:
    return [f for f in contract.functions if not f.is_constructor]


@dataclass(frozen=True)
class Target:
    contract_id: str
    contract_name: str
    function_id: int
    function_name: str
    file: str
    code: str

    def tag(self, agent: str) -> dict:
        return {"agent": agent, "contract": self.contract_name, "file": self.file, "function": self.function_name}


def span_code_slot(unit: SpanUnit, qualified: str, span: tuple[int, int]) -> str:
    return f"// function under review: {qualified}\n" + unit.text_of(span)


def targets(unit: SourceUnit | SpanUnit) -> list[Target]:
    """Every function the agents are asked about.

    Span units (outside the parsed subset) identify a function by its start offset.
    """
    file = PurePosixPath(unit.path).name
    out = []
    if isinstance(unit, SpanUnit):
        for c in unit.contracts:
            for f in c.functions:
                if f.name == "constructor":
                    continue
                code = span_code_slot(unit, f"{c.name}.{f.name}", f.span)
                out.append(Target(f"{unit.path}:{c.name}", c.name, f.span[0], f.name, file, code))
        return out
    for contract in unit.contracts:
        for func in analysable(contract):
            out.append(Target(contract_id_of(unit, contract), contract.name, func.id, func.name, file,
                              code_slot(unit, contract, func)))
    return out


def _targets(unit, cfg: AnalysisConfig, skipped: Optional[list]):
    for t in targets(unit):
        size = approx_tokens(t.code)
        if size > cfg.token_budget:
            reason = f"code slot is about {size} tokens, over the budget of {cfg.token_budget}"
            log.warning("skipping %s.%s: %s", t.contract_name, t.function_name, reason)
            if skipped is not None:
                skipped.append(SkippedFunction(t.contract_id, t.function_name, reason))
            continue
        yield t


def run_auditor(
    unit: SourceUnit | SpanUnit,
    gateway: Gateway,
    knowledge: Optional[Knowledge] = None,
    cfg: Optional[AnalysisConfig] = None,
    skipped: Optional[list] = None,
) -> list[AgentVerdict]:
    """Scenario question per subcategory; property question only after a yes."""
    knowledge = knowledge or Knowledge.load()
    cfg = cfg or AnalysisConfig()
    verdicts = []
    for t in _targets(unit, cfg, skipped):
        code, tag = t.code, t.tag("auditor")
        for sub in Subcategory:
            if sub not in cfg.scope:
                continue
            entry = knowledge.scenarios[sub]
            prompt = render(AUDITOR_SCENARIO, {"Code": code, "Scenario": entry.scenario_text})
            answer = gateway.ask_majority(prompt, cfg.auditor_samples, dict(tag, stage="scenario", label=sub.value))
            if answer.answer != "yes":
                continue
            prompt = render(
                AUDITOR_PROPERTY, {"Code": code, "Scenario": entry.scenario_text, "Property": entry.property_text}
            )
            answer = gateway.ask_majority(prompt, cfg.auditor_samples, dict(tag, stage="property", label=sub.value))
            if answer.answer == "yes":
                verdicts.append(
                    AgentVerdict(
                        t.contract_id, t.function_id, t.function_name, Provenance.Auditor, sub.value,
                        answer.votes, cfg.auditor_samples,
                    )
                )
    return verdicts


def run_attacker(
    unit: SourceUnit | SpanUnit,
    gateway: Gateway,
    knowledge: Optional[Knowledge] = None,
    cfg: Optional[AnalysisConfig] = None,
    skipped: Optional[list] = None,
) -> list[AgentVerdict]:
    """Feature question per primary category; attack-model question only after a yes."""
    knowledge = knowledge or Knowledge.load()
    cfg = cfg or AnalysisConfig()
    primaries = [p for p in PrimaryCategory if any(s in cfg.scope for s in subcategories_of(p))]
    verdicts = []
    for t in _targets(unit, cfg, skipped):
        code, tag = t.code, t.tag("attacker")
        for primary in primaries:
            entry = knowledge.features[primary]
            prompt = render(ATTACKER_FEATURE, {"Code": code, "Feature": entry.feature_text})
            answer = gateway.ask_majority(prompt, cfg.attacker_samples, dict(tag, stage="feature", label=primary.value))
            if answer.answer != "yes":
                continue
            prompt = render(
                ATTACKER_MODEL, {"Code": code, "Feature": entry.feature_text, "Attack Model": entry.attack_model_text}
            )
            answer = gateway.ask_majority(prompt, cfg.attacker_samples, dict(tag, stage="model", label=primary.value))
            if answer.answer == "yes":
                verdicts.append(
                    AgentVerdict(
                        t.contract_id, t.function_id, t.function_name, Provenance.Attacker, primary.value,
                        answer.votes, cfg.attacker_samples,
                    )
                )
    return verdicts


def _better(a: Finding, b: Finding) -> bool:
    return (PRECEDENCE[a.provenance], a.confidence) > (PRECEDENCE[b.provenance], b.confidence)


def fuse(
    auditor: Iterable[AgentVerdict],
    attacker: Iterable[AgentVerdict],
    scope: frozenset[Subcategory] = frozenset(Subcategory),
) -> list[Finding]:
    """Combine both agents' verdicts into findings.

    An Auditor verdict is kept in every case and becomes ``Fused`` when the
    Attacker flagged the same function with the parent category.  An Attacker
    verdict that confirms nothing expands to every subcategory of its category.
    """
    auditor = list(auditor)
    attacker = list(attacker)
    confirmed: set[tuple[str, int, PrimaryCategory]] = {
        (v.contract_id, v.function_id, PrimaryCategory(v.label)) for v in attacker
    }
    audited: set[tuple[str, int, PrimaryCategory]] = set()
    best: dict[tuple, Finding] = {}

    def keep(f: Finding) -> None:
        if f.subcategory not in scope:
            return
        old = best.get(f.key)
        if old is None or _better(f, old):
            best[f.key] = f

    for v in auditor:
        sub = Subcategory(v.label)
        primary = parent_category(sub)
        audited.add((v.contract_id, v.function_id, primary))
        prov = Provenance.Fused if (v.contract_id, v.function_id, primary) in confirmed else Provenance.Auditor
        keep(Finding(v.contract_id, v.function_id, v.function_name, sub, prov, Fraction(v.votes, v.samples)))
    for v in attacker:
        primary = PrimaryCategory(v.label)
        if (v.contract_id, v.function_id, primary) in audited:
            continue
        for sub in subcategories_of(primary):
            keep(Finding(v.contract_id, v.function_id, v.function_name, sub, Provenance.Attacker,
                         ATTACKER_ONLY_CONFIDENCE))
    return sorted(best.values(), key=lambda f: (f.contract_id, f.function_id, f.subcategory.value))
