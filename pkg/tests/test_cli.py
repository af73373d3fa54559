import json
import shutil

import pytest
from click.testing import CliRunner

from conftest import ANSWERS, FIXTURES, SEEDED
from logicfuzz import __version__
from logicfuzz.cli import main

SCRIPTED_NO = {"default": "ANSWER: no", "rules": []}


def invoke(*args, env=None):
    return CliRunner().invoke(main, [str(a) for a in args], env=env, catch_exceptions=False)


@pytest.fixture
def pool_project(tmp_path):
    proj = tmp_path / "proj"
    proj.mkdir()
    shutil.copy(SEEDED / "simple_pool.sol", proj / "simple_pool.sol")
    return proj


def test_version():
    r = invoke("--version")
    assert r.exit_code == 0 and __version__ in r.output


def test_scan_reports_bug_and_exits_zero(pool_project, tmp_path):
    out = tmp_path / "report.json"
    r = invoke("scan", "--project", pool_project, "--llm", f"replay:{FIXTURES}", "--budget", 20000,
               "--out", out, "--artifacts", tmp_path / "art")
    assert r.exit_code == 0, r.output
    doc = json.loads(out.read_text())
    [c] = doc["contracts"]
    assert c["contract_id"] == "simple_pool.sol:SimplePool"
    [v] = c["violations"]
    assert v["subcategory"] == "ApprovalNotClear" and len(v["reproducer"]) == 1
    assert "BUG simple_pool.sol:SimplePool transferFrom ApprovalNotClear" in r.stderr
    assert (tmp_path / "art" / "simple_pool.manifest.json").exists()

    labels = tmp_path / "labels.json"
    labels.write_text(json.dumps({"contracts": {"simple_pool.sol:SimplePool": [
        {"function": "transferFrom", "subcategory": "ApprovalNotClear"}]}}))
    r = invoke("score", "--report", out, "--labels", labels, "--out", tmp_path / "m.json")
    assert r.exit_code == 0 and "TP 1  FP 0  FN 0  recall 100.00%" in r.output
    assert json.loads((tmp_path / "m.json").read_text())["f1_pct"] == 100.0


def test_scan_prints_report_to_stdout_without_out(pool_project, tmp_path):
    answers = tmp_path / "a.json"
    answers.write_text(json.dumps(SCRIPTED_NO))
    r = invoke("scan", "--project", pool_project, "--llm", f"scripted:{answers}", "--budget", 10)
    assert r.exit_code == 0
    assert json.loads(r.stdout)["contracts"][0]["findings"] == []


def test_score_with_unknown_contract_is_config_error(pool_project, tmp_path):
    answers = tmp_path / "a.json"
    answers.write_text(json.dumps(SCRIPTED_NO))
    out = tmp_path / "r.json"
    assert invoke("scan", "--project", pool_project, "--llm", f"scripted:{answers}", "--out", out).exit_code == 0
    labels = tmp_path / "l.json"
    labels.write_text(json.dumps({"contracts": {"simple_pool.sol:SimplePool": [], "nope.sol:Nope": []}}))
    r = invoke("score", "--report", out, "--labels", labels)
    assert r.exit_code == 2 and "nope.sol:Nope" in r.stderr


@pytest.mark.parametrize("args,message", [
    (["--llm", "replay:/does/not/exist.json"], "needs an existing file"),
    (["--llm", "telepathy"], "unknown --llm value"),
    (["--backend", "quantum"], "unknown --backend value"),
    (["--bugs", "NotABug"], "NotABug"),
    (["--budget", "-5", "--llm", f"replay:{FIXTURES}"], "budget"),
])
def test_config_errors_exit_two(pool_project, args, message):
    r = invoke("scan", "--project", pool_project, *args)
    assert r.exit_code == 2 and message in r.stderr


def test_empty_project_is_config_error(tmp_path):
    r = invoke("scan", "--project", tmp_path, "--llm", f"replay:{FIXTURES}")
    assert r.exit_code == 2 and "no .sol inputs" in r.stderr


def test_missing_credential_is_config_error(pool_project):
    r = invoke("scan", "--project", pool_project, env={"OPENAI_API_KEY": ""})
    assert r.exit_code == 2 and "OPENAI_API_KEY" in r.stderr


def test_fixture_miss_is_infrastructure_failure(tmp_path):
    (tmp_path / "other.sol").write_text("contract Other { uint256 x; function f(uint256 a) public { x = a; } }")
    r = invoke("scan", "--project", tmp_path, "--llm", f"replay:{FIXTURES}")
    assert r.exit_code == 3 and "FixtureMiss" in r.stderr


def test_broken_external_backend_is_infrastructure_failure(pool_project):
    r = invoke("scan", "--project", pool_project, "--llm", f"replay:{FIXTURES}", "--backend", "external:false",
               "--budget", 100)
    assert r.exit_code == 3


def test_tolerant_mode_analyses_but_does_not_fuzz(tmp_path):
    text = (SEEDED / "simple_pool.sol").read_text().replace(
        "contract SimplePool {", "contract SimplePool {\n    modifier onlyOwner() { _; }")
    (tmp_path / "pool.sol").write_text(text)
    answers = tmp_path / "a.json"
    answers.write_text(json.dumps({"default": "ANSWER: no", "rules": [
        {"match": {"function": "transferFrom", "label": "ApprovalNotClear"}, "samples": ["ANSWER: yes"]}]}))
    out = tmp_path / "r.json"
    r = invoke("scan", "--project", tmp_path, "--llm", f"scripted:{answers}", "--out", out)
    assert r.exit_code == 0
    doc = json.loads(out.read_text())
    [c] = doc["contracts"]
    assert c["tolerant"] and c["violations"] == [] and c["campaign"] is None
    assert [f["subcategory"] for f in c["findings"]] == ["ApprovalNotClear"]
    assert doc["errors"] and "analysis only" in doc["errors"][0]
    assert "note: pool.sol: outside the supported subset" in r.stderr


def test_config_file_sets_campaign_and_thresholds(pool_project, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"campaign": {"budget": 50, "seed": 9}, "thresholds": {"price_band": [0.5, 2]}}))
    out = tmp_path / "r.json"
    r = invoke("scan", "--project", pool_project, "--llm", f"replay:{FIXTURES}", "--config", cfg, "--out", out)
    assert r.exit_code == 0
    doc = json.loads(out.read_text())
    assert doc["config"]["budget"] == 50 and doc["config"]["seed"] == 9
    assert doc["config"]["thresholds"]["price_band"] == ["1/2", "2/1"]
    assert doc["contracts"][0]["campaign"]["executions"] <= 50


def test_bad_config_file_is_config_error(pool_project, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("[1, 2]")
    r = invoke("scan", "--project", pool_project, "--llm", f"replay:{FIXTURES}", "--config", cfg)
    assert r.exit_code == 2


def test_fixtures_record_then_replay(pool_project, tmp_path):
    out = tmp_path / "fx.json"
    r = invoke("fixtures", "record", "--project", pool_project, "--out", out, "--model", f"scripted:{ANSWERS}")
    assert r.exit_code == 0 and "recorded" in r.output
    r = invoke("scan", "--project", pool_project, "--llm", f"replay:{out}", "--budget", 20000,
               "--out", tmp_path / "r.json")
    assert r.exit_code == 0
    assert len(json.loads((tmp_path / "r.json").read_text())["contracts"][0]["violations"]) == 1


def test_artifacts_inside_project_are_not_rescanned(pool_project, tmp_path):
    args = ["scan", "--project", pool_project, "--llm", f"replay:{FIXTURES}", "--budget", 100,
            "--artifacts", pool_project / "out"]
    first = invoke(*args, "--out", tmp_path / "a.json")
    second = invoke(*args, "--out", tmp_path / "b.json")
    assert first.exit_code == second.exit_code == 0
    assert (pool_project / "out" / "simple_pool.instrumented.sol").exists()
    ids = [c["contract_id"] for c in json.loads((tmp_path / "b.json").read_text())["contracts"]]
    assert ids == ["simple_pool.sol:SimplePool"]
