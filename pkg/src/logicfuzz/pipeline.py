"""End-to-end scan: analysis, extraction, checkers, instrumentation, fuzzing."""

from __future__ import annotations

import datetime as _dt
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path, PurePosixPath
from typing import Optional

from logicfuzz import __version__
from logicfuzz.analysis import AnalysisConfig, Knowledge, SkippedFunction, contract_id_of, fuse, run_attacker, run_auditor
from logicfuzz.backend.external import ExternalBackend
from logicfuzz.backend.interpreter import BuiltinBackend, Program
from logicfuzz.backend.state import BackendCrash, BackendError
from logicfuzz.checkers import CheckerRegistry, Thresholds, UnboundParam, instantiate
from logicfuzz.extraction import EmptyExtraction, extract, load_characteristics
from logicfuzz.frontend import ParseError, UnsupportedFeature, parse
from logicfuzz.frontend.tolerant import SpanUnit, scan_spans
from logicfuzz.fuzz import Campaign, CampaignConfig, CheckerInfo, DeployFailure, checkers_for, derive_seed
from logicfuzz.instrument import InstrumentedUnit, instrument, write_artifacts
from logicfuzz.llm import ClientError, Gateway, ModelClientConfig, make_client
from logicfuzz.report import BugReport, ContractReport
from logicfuzz.taxonomy import Finding, Subcategory

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class InfrastructureError(RuntimeError):
    pass


@dataclass
class RunConfig:
    project: Path
    bugs: frozenset[Subcategory] = frozenset(Subcategory)
    llm: str = "live"
    backend: str = "builtin"
    thresholds: Thresholds = field(default_factory=Thresholds)
    campaign: CampaignConfig = field(default_factory=CampaignConfig)
    out: Optional[Path] = None
    artifacts: Optional[Path] = None
    knowledge: Optional[Path] = None
    characteristics: Optional[Path] = None
    model: Optional[ModelClientConfig] = None
    token_budget: int = 6000
    jobs: int = 1

    def __post_init__(self):
        self.project = Path(self.project)
        if not self.project.is_dir():
            raise ConfigError(f"project directory {self.project} does not exist")
        mode, _, path = self.llm.partition(":")
        if mode in ("replay", "scripted"):
            if not path or not Path(path).is_file():
                raise ConfigError(f"{mode} mode needs an existing file, got {path or 'nothing'!r}")
        elif self.llm != "live":
            raise ConfigError(f"unknown --llm value {self.llm!r}; use replay:<file>, scripted:<file> or live")
        if self.backend != "builtin" and not (self.backend.startswith("external:") and self.backend[9:].strip()):
            raise ConfigError(f"unknown --backend value {self.backend!r}; use builtin or external:<command>")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")

    def describe(self) -> dict:
        """Settings recorded in the report; file locations are reduced to names."""
        mode, _, path = self.llm.partition(":")
        return {
            "bugs": "all" if self.bugs == frozenset(Subcategory) else sorted(s.value for s in self.bugs),
            "llm": f"{mode}:{PurePosixPath(path).name}" if path else mode,
            "backend": self.backend.split(":", 1)[0],
            "seed": self.campaign.seed,
            "budget": self.campaign.budget,
            "target_weight": self.campaign.target_weight,
            "stop_on_first": self.campaign.stop_on_first,
            "max_sequence": self.campaign.max_sequence,
            "thresholds": self.thresholds.to_json(),
            "token_budget": self.token_budget,
        }


@dataclass(frozen=True)
class CampaignJob:
    """Everything a worker needs to rebuild the program and run one campaign."""

    contract_id: str
    contract: str
    path: str
    text: str
    checker_spans: tuple[tuple[int, int], ...]
    alert_map: tuple[tuple[int, str], ...]
    checkers: tuple[CheckerInfo, ...]
    config: CampaignConfig
    backend: str


def run_campaign(job: CampaignJob) -> dict:
    unit = parse(job.text, job.path)
    if job.backend == "builtin":
        backend = BuiltinBackend(Program(unit, job.contract, job.checker_spans, dict(job.alert_map)))
    else:
        backend = ExternalBackend(job.backend.split(":", 1)[1], job.text, job.contract, list(job.checker_spans),
                                  dict(job.alert_map), job.path)
    started = time.perf_counter()
    try:
        result = Campaign(unit.contract(job.contract), backend, job.config, list(job.checkers)).run()
        return {"result": result, "error": None, "seconds": time.perf_counter() - started}
    except DeployFailure as e:
        return {"result": None, "error": f"DeployFailure: {e}", "seconds": time.perf_counter() - started}
    finally:
        close = getattr(backend, "close", None)
        if close:
            close()


def _discover(project: Path) -> list[Path]:
    # our own instrumented outputs are never inputs, even when written inside the project
    files = sorted(p for p in project.rglob("*.sol") if p.is_file() and not p.name.endswith(".instrumented.sol"))
    if not files:
        raise ConfigError(f"no .sol inputs under {project}")
    return files


@dataclass
class _FileState:
    rel: str
    unit: object
    tolerant: bool
    reports: dict[str, ContractReport]
    instrumented: Optional[InstrumentedUnit] = None
    owners: dict[str, Finding] = field(default_factory=dict)  # checker id -> finding


def scan(cfg: RunConfig, gateway: Optional[Gateway] = None, fuzz: bool = True) -> tuple[BugReport, Gateway]:
    """Run the whole pipeline over ``cfg.project``.

    Bugs found never raise; errors local to one file or contract are recorded
    in the report.  Model and backend infrastructure failures propagate.
    """
    files = _discover(cfg.project)
    if gateway is None:
        try:
            gateway = Gateway(make_client(cfg.llm, cfg=cfg.model))
        except (ClientError, ValueError) as e:
            raise ConfigError(str(e)) from None
    knowledge = Knowledge.load(cfg.knowledge)
    characteristics = load_characteristics(cfg.characteristics)
    acfg = AnalysisConfig(token_budget=cfg.token_budget, scope=cfg.bugs)
    phases: dict[str, dict[str, float]] = {}
    errors: list[str] = []
    states: list[_FileState] = []
    wall = time.perf_counter()

    for path in files:
        rel = path.relative_to(cfg.project).as_posix()
        text = path.read_text(encoding="utf-8")
        timing = phases.setdefault(rel, {})
        t = time.perf_counter()
        tolerant = False
        try:
            unit = parse(text, rel)
        except (ParseError, UnsupportedFeature) as e:
            try:
                unit = scan_spans(text, rel)
            except ParseError as e2:
                errors.append(f"{rel}: cannot be read even in tolerant mode: {e2}")
                continue
            tolerant = True
            errors.append(f"{rel}: outside the supported subset ({e}); analysis only, no checkers or fuzzing")
        timing["parse"] = time.perf_counter() - t

        t = time.perf_counter()
        skipped: list[SkippedFunction] = []
        verdicts_a = run_auditor(unit, gateway, knowledge, acfg, skipped)
        verdicts_b = run_attacker(unit, gateway, knowledge, acfg)
        findings = fuse(verdicts_a, verdicts_b, cfg.bugs)
        timing["analysis"] = time.perf_counter() - t

        if isinstance(unit, SpanUnit):
            ids = [f"{rel}:{c.name}" for c in unit.contracts]
        else:
            ids = [contract_id_of(unit, c) for c in unit.contracts]
        reports = {cid: ContractReport(cid, tolerant=tolerant) for cid in ids}
        for f in findings:
            reports[f.contract_id].findings.append(f)
        for s in skipped:
            reports[s.contract_id].skipped.append({"function": s.function_name, "reason": s.reason})
        state = _FileState(rel, unit, tolerant, reports)
        states.append(state)
        if tolerant or not findings:
            continue

        t = time.perf_counter()
        registry = CheckerRegistry()
        instances = []
        for f in findings:
            cr = reports[f.contract_id]
            try:
                res = extract(f, unit, gateway, characteristics)
            except EmptyExtraction as e:
                cr.extraction.append(e.result.to_json())
                cr.skipped.append({"function": f.function_name, "subcategory": f.subcategory.value,
                                   "reason": "EmptyExtraction"})
                continue
            cr.extraction.append(res.to_json())
            try:
                made = instantiate(res, cfg.thresholds, registry, characteristics)
            except UnboundParam as e:
                cr.skipped.append({"function": f.function_name, "subcategory": f.subcategory.value,
                                   "reason": f"UnboundParam: {e}"})
                continue
            for inst in made:
                state.owners[inst.checker_id] = f
            instances.extend(made)
        timing["extraction"] = time.perf_counter() - t
        if not instances:
            continue

        t = time.perf_counter()
        outcome = instrument(unit, instances)
        for checker_id, reason in outcome.skipped:
            f = state.owners.pop(checker_id)
            reports[f.contract_id].skipped.append({"function": f.function_name, "subcategory": f.subcategory.value,
                                                   "checker_id": checker_id, "reason": reason})
        iu = outcome.unit
        state.instrumented = iu
        for entry in iu.manifest:
            reports[f"{rel}:{entry.contract}"].manifest.append(entry.to_json())
        if cfg.artifacts is not None:
            cfg.artifacts.mkdir(parents=True, exist_ok=True)
            write_artifacts(iu, cfg.artifacts / PurePosixPath(rel).parent)
        timing["instrumentation"] = time.perf_counter() - t

    if fuzz:
        _fuzz_all(cfg, states, phases)

    contracts = []
    for state in states:
        for cr in state.reports.values():
            confirmed = {state.owners[v.checker_id].key for v in cr.violations if v.checker_id in state.owners}
            cr.unconfirmed = [f for f in cr.findings if f.key not in confirmed]
            contracts.append(cr)
    stamp = {
        "generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "total_seconds": round(time.perf_counter() - wall, 3),
        "phase_seconds": {k: {p: round(s, 3) for p, s in v.items()} for k, v in phases.items()},
    }
    report = BugReport(__version__, cfg.describe(), contracts, errors, gateway.usage.to_json(), stamp)
    if cfg.out is not None:
        report.save(cfg.out)
    return report, gateway


def _fuzz_all(cfg: RunConfig, states: list[_FileState], phases: dict) -> None:
    jobs: list[tuple[_FileState, CampaignJob]] = []
    for state in states:
        iu = state.instrumented
        if iu is None:
            continue
        for contract in iu.rewritten.contracts:
            infos = checkers_for(iu.manifest, contract.name)
            if not infos:
                continue
            cid = f"{state.rel}:{contract.name}"
            job = CampaignJob(
                cid, contract.name, iu.rewritten.path, iu.text, tuple(iu.checker_spans),
                tuple(sorted(iu.alert_map.items())), tuple(infos),
                replace(cfg.campaign, seed=derive_seed(cfg.campaign.seed, cid)), cfg.backend,
            )
            jobs.append((state, job))
    try:
        if cfg.jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                outputs = list(pool.map(run_campaign, [j for _, j in jobs]))
        else:
            outputs = [run_campaign(j) for _, j in jobs]
    except BackendCrash as e:
        raise InfrastructureError(f"execution backend failed: {e}") from None
    except BackendError as e:
        raise InfrastructureError(f"execution backend error: {e}") from None
    for (state, job), out in zip(jobs, outputs):
        cr = state.reports[job.contract_id]
        phases.setdefault(state.rel, {})[f"fuzzing:{job.contract}"] = out["seconds"]
        if out["error"]:
            cr.errors.append(out["error"])
            continue
        result = out["result"]
        cr.violations = list(result.violations)
        cr.campaign = {k: v for k, v in result.to_json().items() if k != "violations"}


def record_fixtures(project: Path, out: Path, model: str = "live", cfg: Optional[ModelClientConfig] = None,
                    **kwargs) -> int:
    """Run analysis and extraction against ``model`` and save every sample as a fixture file."""
    run_cfg = RunConfig(Path(project), llm=model, model=cfg, **kwargs)
    _, gateway = scan(run_cfg, fuzz=False)
    gateway.transcript.save(out)
    return len(gateway.transcript.fixtures())
