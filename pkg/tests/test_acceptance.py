"""End-to-end acceptance checks; each records a PASS/FAIL line printed after the run."""

import json
import random
import shutil
import time
from pathlib import Path

import pytest

from cases import corpus_instrumentations, neutrality_mismatches
from conftest import ANSWERS, FIXTURES, LABELS, SEEDED, criterion, load
from corruption import corrupted_items
from logicfuzz.backend.interpreter import BuiltinBackend, Program
from logicfuzz.backend.state import ATTACKER, MAX_UINT, VICTIM, Transaction
from logicfuzz.frontend import parse
from logicfuzz.fuzz import CampaignConfig, replay
from logicfuzz.instrument import artifact_paths
from logicfuzz.pipeline import RunConfig, record_fixtures, scan
from logicfuzz.report import LabelSet, score, without_timestamp
from logicfuzz.taxonomy import CheckerKind
from synthetic import synthetic
from test_analysis import check_fusion, random_verdicts
from test_extraction import golden_extraction, is_accepted
from test_interpreter import ARITH_SRC, COUNTER, call, operand, oracle

ETH = 10**18


def instrumented_backend(artifacts: Path, rel: str, contract: str) -> BuiltinBackend:
    """Rebuild the executable program from the instrumented source and manifest a scan wrote."""
    src, man = artifact_paths(artifacts / Path(rel).parent, rel)
    manifest = json.loads(man.read_text())
    spans = sorted([tuple(s) for c in manifest["checkers"] for s in c["spans"]] +
                   [tuple(s) for s in manifest["support_spans"]])
    alerts = {c["alert_id"]: c["checker_id"] for c in manifest["checkers"]}
    return BuiltinBackend(Program(parse(src.read_text(), rel), contract, spans, alerts))


def canonical(report) -> str:
    return json.dumps(without_timestamp(report.to_json()), indent=2, sort_keys=True)


@pytest.fixture(scope="session")
def full_scan(tmp_path_factory):
    art = tmp_path_factory.mktemp("artifacts")
    t = time.perf_counter()
    report, _ = scan(RunConfig(SEEDED, llm=f"replay:{FIXTURES}", artifacts=art))
    return report, art, time.perf_counter() - t


# ---------------------------------------------------------------- criterion 1


def test_approval_case_study(tmp_path):
    with criterion("1", "approval") as info:
        proj = tmp_path / "proj"
        proj.mkdir()
        for name in ("simple_pool.sol", "simple_pool_patched.sol"):
            shutil.copy(SEEDED / name, proj / name)
        t = time.perf_counter()
        report, _ = scan(RunConfig(proj, llm=f"replay:{FIXTURES}", campaign=CampaignConfig(seed=42, budget=50_000)))
        elapsed = time.perf_counter() - t
        buggy = report.contract("simple_pool.sol:SimplePool")
        [v] = buggy.violations
        assert v.kind == CheckerKind.TokenChange
        assert [tx.function for tx in v.reproducer] == ["transferFrom"]
        assert report.contract("simple_pool_patched.sol:SimplePool").violations == []
        assert elapsed < 60
        info["detail"] = f"1-tx transferFrom reproducer, patched twin clean, {elapsed:.1f}s"


def test_first_deposit_case_study(full_scan):
    report, art, _ = full_scan
    with criterion("1", "first-deposit") as info:
        assert (2 * ETH) // (ETH + 1) == 1
        [v] = report.contract("liquidity_pool.sol:LiquidityPool").violations
        assert v.kind == CheckerKind.ShareSafety
        be = instrumented_backend(art, "liquidity_pool.sol", "LiquidityPool")
        seq = (Transaction(ATTACKER, "LiquidityPool", "deposit", (), 1),
               Transaction(ATTACKER, "LiquidityPool", "addRewards", (), ETH),
               Transaction(VICTIM, "LiquidityPool", "deposit", (), 2 * ETH))
        res = replay(be, be.deploy(), seq)
        assert all(r.ok for r in res) and res[2].return_value == 1
        assert v.checker_id in res[2].alerts
        assert report.contract("liquidity_pool_patched.sol:LiquidityPool").violations == []
        patched = instrumented_backend(art, "liquidity_pool_patched.sol", "LiquidityPool")
        assert not any(r.alerts for r in replay(patched, patched.deploy(), seq))
        info["detail"] = "3-step sequence mints 1 share and alerts, patched twin clean"


def test_amm_case_study(full_scan):
    report, _, _ = full_scan
    with criterion("1", "amm") as info:
        assert report.config["thresholds"]["price_band"] == ["9/10", "11/10"]
        [v] = report.contract("amm_pool.sol:AmmPool").violations
        assert v.kind == CheckerKind.PriceChange
        assert report.contract("amm_pool_patched.sol:AmmPool").violations == []
        be = BuiltinBackend(Program(load("amm_pool.sol")))
        s = be.deploy()
        s = call(be, s, "faucet", 100, 0).new_state
        s = call(be, s, "faucet", 30, 0, caller=VICTIM).new_state
        outs = []
        for fn, amount, who in (("swapAForB", 100, ATTACKER), ("swapAForB", 30, VICTIM), ("swapBForA", 100, ATTACKER)):
            r = call(be, s, fn, amount, caller=who)
            outs.append(r.return_value)
            s = r.new_state
        assert outs == [100, 20, 165]
        assert s.var("AmmPool", "balanceA")[ATTACKER] - 100 == 65
        info["detail"] = "PriceChange violation under 9/10..11/10, trace 100/20/165, profit 65"


# ---------------------------------------------------------------- criterion 2


def test_seeded_benchmark(full_scan):
    report, _, elapsed = full_scan
    with criterion("2", "benchmark") as info:
        m = score(report, LabelSet.load(LABELS))
        assert len(report.contracts) == 12
        kinds = {e["kind"] for c in report.contracts for e in c.manifest}
        subs = {v.subcategory for v in report.violations}
        assert kinds == {k.value for k in CheckerKind} and len(subs) >= 6
        assert m.recall == 1 and m.fp == 0
        assert elapsed < 600
        info["detail"] = f"TP {m.tp} FP {m.fp} FN {m.fn}, {len(subs)} subcategories, {elapsed:.0f}s"


# ---------------------------------------------------------------- criterion 3


@pytest.mark.parametrize("tp,fp,fn,recall,second,field", [
    (20, 0, 3, 86.96, 93.02, "f1_pct"),
    (21, 34, 2, 91.30, 53.85, "f1_pct"),
])
def test_metrics_oracle(tp, fp, fn, recall, second, field):
    with criterion("3", f"{tp}/{fp}/{fn}") as info:
        out = score(*synthetic(tp, fp, fn)).to_json()
        assert abs(out["recall_pct"] - recall) <= 0.01 and abs(out[field] - second) <= 0.01
        info["detail"] = f"{out['recall_pct']}% / {out[field]}%"


# ---------------------------------------------------------------- criterion 4


def test_fusion_properties_on_random_sets():
    with criterion("4", "fusion") as info:
        rng = random.Random(2024)
        for _ in range(1000):
            check_fusion(*random_verdicts(rng))
        info["detail"] = "1000 random verdict sets"


# ---------------------------------------------------------------- criterion 5


@pytest.mark.parametrize("op", ["add", "sub", "mul", "div", "mod"])
def test_arithmetic_conformance(op):
    with criterion("5", op) as info:
        be = BuiltinBackend(Program(parse(ARITH_SRC)))
        s = be.deploy()
        rng = random.Random(f"acceptance-{op}")
        reverts = 0
        for _ in range(10_000):
            a, b = operand(rng), operand(rng)
            r = call(be, s, op, a, b)
            want = oracle(op, a, b)
            assert (r.return_value if r.ok else None) == want, (op, a, b)
            reverts += want is None
        info["detail"] = f"10000 pairs, {reverts} reverting"


def test_revert_atomicity():
    with criterion("5", "atomicity") as info:
        be = BuiltinBackend(Program(parse(COUNTER)))
        rng = random.Random(99)
        checked = 0
        for _ in range(1000):
            s = be.deploy()
            for _ in range(rng.randint(0, 5)):
                r = call(be, s, "bump", rng.randrange(0, 40), caller=rng.choice((ATTACKER, VICTIM)))
                if r.ok:
                    s = r.new_state
            before = s.digest
            # always reverts: either the require fails or the addition overflows
            r = call(be, s, "bump", rng.choice((100, 10**30, MAX_UINT)), caller=rng.choice((ATTACKER, VICTIM)))
            assert r.status == "Reverted" and r.new_state.digest == before
            checked += 1
        info["detail"] = f"{checked} reverting sequences"


# ---------------------------------------------------------------- criterion 6


def test_strip_idempotence():
    with criterion("6", "strip") as info:
        n = 0
        for name, unit, out in corpus_instrumentations():
            assert out.unit.strip() == unit.raw_text, name
            n += 1
        info["detail"] = f"{n} corpus files byte-exact"


def test_semantic_neutrality():
    with criterion("6", "neutrality") as info:
        mismatches, executed = neutrality_mismatches(1000, seed=42)
        assert mismatches == []
        info["detail"] = f"1000 sequences, {executed} transactions, identical digests"


# ---------------------------------------------------------------- criterion 7


def test_determinism_and_replay(full_scan, tmp_path):
    first, art, _ = full_scan
    with criterion("7", "determinism") as info:
        second, _ = scan(RunConfig(SEEDED, llm=f"replay:{FIXTURES}", artifacts=tmp_path / "art2"))
        assert canonical(first) == canonical(second)
        info["detail"] = "two scans byte-identical without timestamp"
    with criterion("7", "replay") as info:
        n = 0
        for c in first.contracts:
            rel, name = c.contract_id.rsplit(":", 1)
            for v in c.violations:
                be = instrumented_backend(art, rel, name)
                res = replay(be, be.deploy(), v.reproducer)
                assert v.checker_id in res[-1].alerts
                assert res[-1].new_state.digest == v.post_state_digest
                n += 1
        assert n == len(first.violations) > 0
        info["detail"] = f"{n}/{n} reproducers replay"


# ---------------------------------------------------------------- criterion 8


def test_corrupted_items_are_rejected():
    with criterion("8", "corruption") as info:
        accepted = [raw for kind, raw, *rest in corrupted_items(10_000, seed=8) if is_accepted(kind, raw, *rest)]
        assert accepted == []
        info["detail"] = "10000 corruptions, 0 accepted"


def test_golden_extraction_matches_labels():
    with criterion("8", "labels") as info:
        assert golden_extraction() == []
        info["detail"] = "26 labelled functions match exactly"


# ---------------------------------------------------------------- fixtures


def test_golden_fixtures_regenerate_identically(tmp_path):
    out = tmp_path / "fixtures.json"
    record_fixtures(FIXTURES.parent, out, f"scripted:{ANSWERS}")
    assert out.read_bytes() == FIXTURES.read_bytes()
