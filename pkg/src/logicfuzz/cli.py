"""Command-line interface.

Exit codes: 0 when the run completed (whether or not bugs were found),
2 for configuration errors, 3 for infrastructure failures.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path
from typing import Optional

import click

from logicfuzz import __version__
from logicfuzz.backend.state import BackendError
from logicfuzz.checkers import Thresholds
from logicfuzz.fuzz import CampaignConfig
from logicfuzz.llm import ClientError, ModelClientConfig
from logicfuzz.pipeline import ConfigError, InfrastructureError, RunConfig, record_fixtures, scan
from logicfuzz.report import BugReport, LabelSet, ReportFormatError, UnknownContractInLabels, UnlabelledContract, score
from logicfuzz.taxonomy import parse_bug_scope

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFRA = 3

log = logging.getLogger("logicfuzz")


def _load_config(path: Optional[Path]) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return data


def _model_config(data: dict) -> ModelClientConfig:
    return ModelClientConfig(mode="live", **data.get("model", {}))


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    """Map exceptions to the documented exit codes."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (UnknownContractInLabels, UnlabelledContract) as e:
            _fail(EXIT_CONFIG, e.args[0])
        except (ConfigError, ReportFormatError, ValueError) as e:
            _fail(EXIT_CONFIG, str(e))
        except (InfrastructureError, ClientError, BackendError, OSError) as e:
            _fail(EXIT_INFRA, f"{type(e).__name__}: {e}")

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@click.group()
@click.version_option(__version__, prog_name="logicfuzz")
@click.option("-v", "--verbose", count=True, help="Repeat for more log output.")
def main(verbose: int) -> None:
    """Find business-logic bugs in Solidity contracts."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command("scan")
@click.option("--project", required=True, type=click.Path(path_type=Path), help="Directory of .sol files.")
@click.option("--bugs", default="all", show_default=True, help="Comma-separated subcategories or categories.")
@click.option("--llm", "llm", default="live", show_default=True, help="replay:<file>, scripted:<file> or live.")
@click.option("--backend", default="builtin", show_default=True, help="builtin or external:<command>.")
@click.option("--budget", type=int, default=None, help="Executions per contract (default 100000).")
@click.option("--seed", type=int, default=None, help="Master seed (default 42).")
@click.option("--target-weight", type=float, default=None, help="Weight of checker-bearing functions (default 10).")
@click.option("--exhaustive", is_flag=True, help="Keep fuzzing after every checker has fired.")
@click.option("--out", type=click.Path(path_type=Path), default=None, help="Report file; stdout when omitted.")
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None, help="JSON config file.")
@click.option("--knowledge", type=click.Path(path_type=Path), default=None, help="Knowledge-base JSON override.")
@click.option("--characteristics", type=click.Path(path_type=Path), default=None,
              help="Characteristics table JSON override.")
@click.option("--artifacts", type=click.Path(path_type=Path), default=None,
              help="Directory for instrumented sources and manifests.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Parallel fuzzing campaigns.")
@_guard
def scan_cmd(project, bugs, llm, backend, budget, seed, target_weight, exhaustive, out, config_path, knowledge,
             characteristics, artifacts, jobs):
    """Analyse, instrument and fuzz every contract under PROJECT."""
    data = _load_config(config_path)
    campaign = dict(data.get("campaign", {}))
    for key, value in (("budget", budget), ("seed", seed), ("target_weight", target_weight)):
        if value is not None:
            campaign[key] = value
    if exhaustive:
        campaign["stop_on_first"] = False
    cfg = RunConfig(
        project=project,
        bugs=parse_bug_scope(bugs),
        llm=llm,
        backend=backend,
        thresholds=Thresholds.from_json(data.get("thresholds", {})),
        campaign=CampaignConfig(**campaign),
        out=out,
        artifacts=artifacts,
        knowledge=knowledge,
        characteristics=characteristics,
        model=_model_config(data) if llm == "live" else None,
        token_budget=int(data.get("token_budget", 6000)),
        jobs=jobs,
    )
    report, _ = scan(cfg)
    if out is None:
        click.echo(report.dumps(), nl=False)
    _summarise(report)


def _summarise(report: BugReport) -> None:
    for c in report.contracts:
        for v in c.violations:
            click.echo(f"BUG {c.contract_id} {v.function_name} {v.subcategory.value} "
                       f"({len(v.reproducer)} tx, found after {v.executions_until_violation} executions)", err=True)
            for tx in v.reproducer:
                click.echo(f"    {tx.describe()}", err=True)
    for e in report.errors:
        click.echo(f"note: {e}", err=True)
    n = len(report.violations)
    usage = report.usage
    click.echo(f"{n} violation(s) in {len(report.contracts)} contract(s); "
               f"{usage.get('samples', 0)} model samples, about "
               f"{usage.get('prompt_tokens', 0) + usage.get('response_tokens', 0)} tokens", err=True)


@main.command("score")
@click.option("--report", "report_path", required=True, type=click.Path(path_type=Path))
@click.option("--labels", "labels_path", required=True, type=click.Path(path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), default=None, help="Write metrics JSON here.")
@_guard
def score_cmd(report_path, labels_path, out):
    """Compare a report's confirmed bugs with a label file."""
    metrics = score(BugReport.load(report_path), LabelSet.load(labels_path))
    if out is not None:
        out.write_text(json.dumps(metrics.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    click.echo(metrics.summary())


@main.group("fixtures")
def fixtures() -> None:
    """Model fixture files."""


@fixtures.command("record")
@click.option("--project", required=True, type=click.Path(path_type=Path))
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--model", default="live", show_default=True, help="live or scripted:<answer key>.")
@click.option("--bugs", default="all", show_default=True)
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
@_guard
def record_cmd(project, out, model, bugs, config_path):
    """Record every model sample a scan needs into a replay fixture file."""
    data = _load_config(config_path)
    n = record_fixtures(project, out, model, _model_config(data) if model == "live" else None,
                        bugs=parse_bug_scope(bugs))
    click.echo(f"recorded {n} fixture(s) to {out}")


if __name__ == "__main__":
    main()
