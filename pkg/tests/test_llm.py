import json

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from logicfuzz.llm import (
    ClientError,
    FixtureMiss,
    Gateway,
    LiveClient,
    MissingSlot,
    ModelClientConfig,
    ReplayClient,
    ScriptedClient,
    ScriptItem,
    majority,
    make_client,
    parse_answer,
    prompt_digest,
    record_session,
    render,
)
from logicfuzz.llm.templates import AUDITOR_SCENARIO, EXTRACTION, PromptTemplate


def test_render_binds_all_slots_verbatim():
    t = PromptTemplate("t", "", "Code: [%Code%] / [%Scenario%]")
    assert render(t, {"Code": "a [%Scenario%] b", "Scenario": "s"}) == "Code: a [%Scenario%] b / s"
    with pytest.raises(MissingSlot):
        render(t, {"Code": "x"})


def test_templates_declare_their_slots():
    assert set(AUDITOR_SCENARIO.slots) == {"Code", "Scenario"}
    assert {"Bug", "Code", "Roles"} <= set(EXTRACTION.slots)


@pytest.mark.parametrize("text, want", [
    ("ANSWER: yes", "yes"),
    ("I think so.\nanswer:  No.", "no"),
    ("ANSWER: no\nOn reflection\nANSWER: yes", "yes"),
    ("CATEGORY: RiskyFirstDeposit", "riskyfirstdeposit"),
    ("maybe", None),
    ("ANSWER: perhaps", None),
])
def test_parse_answer(text, want):
    assert parse_answer(text) == want


def test_majority_examples():
    m = majority(["yes", "yes", "no", "yes", "yes"])
    assert (m.answer, m.votes) == ("yes", 4)
    assert majority(["yes", "no"]).answer == "yes"
    m = majority([None, None])
    assert (m.answer, m.votes) == ("no", 0)


@given(st.lists(st.sampled_from(["yes", "no", None]), min_size=1, max_size=9))
def test_majority_picks_a_most_common_answer(samples):
    m = majority(samples)
    counts = {a: samples.count(a) for a in ("yes", "no")}
    if counts["yes"] == counts["no"] == 0:
        assert m.answer == "no" and m.votes == 0
    else:
        assert m.votes == max(counts.values())
        assert counts[m.answer] == m.votes
        if counts["yes"] == counts["no"]:
            assert m.answer == "yes"


def test_replay_round_trip(tmp_path):
    client = ScriptedClient({"default": "ANSWER: no", "rules": [
        {"match": {"label": "X"}, "samples": ["yes", "yes", "no"]}]})
    out = tmp_path / "fx.json"
    script = [ScriptItem("prompt one", 3, {"label": "X"}), ScriptItem("prompt two", 2, {"label": "Y"})]
    record_session(client, script, out)
    data = json.loads(out.read_text())
    assert {d["prompt_digest"] for d in data} == {prompt_digest("prompt one"), prompt_digest("prompt two")}
    replay = Gateway(ReplayClient.from_file(out))
    assert replay.ask_majority("prompt one", 3).votes == 2
    assert replay.sample("prompt two", 2) == ["ANSWER: no", "ANSWER: no"]
    with pytest.raises(FixtureMiss) as err:
        replay.sample("prompt three", 1)
    assert "prompt three" in str(err.value)


def test_scripted_file_glob_and_cycling():
    c = ScriptedClient({"rules": [{"match": {"file": "pool*.sol", "function": "f"}, "samples": ["yes", "no"]}]})
    assert c.complete("p", 0, {"file": "pool_patched.sol", "function": "f"}) == "ANSWER: yes"
    assert c.complete("p", 3, {"file": "pool.sol", "function": "f"}) == "ANSWER: no"
    assert c.complete("p", 0, {"file": "other.sol", "function": "f"}) == "ANSWER: no"


def test_gateway_counts_usage():
    gw = Gateway(ScriptedClient({}))
    gw.sample("x" * 40, 3)
    assert gw.usage.prompts == 1 and gw.usage.samples == 3 and gw.usage.prompt_tokens == 30


def test_parallel_sampling_keeps_order():
    class Echo:
        def complete(self, prompt, i, tag=None):
            return f"sample {i}"

    assert Gateway(Echo(), parallel=4).sample("p", 5) == [f"sample {i}" for i in range(5)]


def _live(handler, monkeypatch, **kw):
    monkeypatch.setenv("TEST_MODEL_KEY", "secret-value")
    cfg = ModelClientConfig(mode="live", credential_env="TEST_MODEL_KEY", endpoint="https://model.test/v1", **kw)
    return LiveClient(cfg, transport=httpx.MockTransport(handler))


def test_live_client_posts_chat_request(monkeypatch):
    seen = {}

    def handler(request):
        seen["auth"] = request.headers["authorization"]
        seen["body"] = json.loads(request.content)
        return httpx.Response(200, json={"choices": [{"message": {"content": "ANSWER: yes"}}]})

    client = _live(handler, monkeypatch)
    assert client.complete("hello", 0) == "ANSWER: yes"
    assert seen["auth"] == "Bearer secret-value"
    assert seen["body"]["messages"][0]["content"] == "hello"


def test_live_client_retries_then_fails_without_leaking_key(monkeypatch):
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(503)

    monkeypatch.setattr("time.sleep", lambda s: None)
    client = _live(handler, monkeypatch, max_retries=2)
    with pytest.raises(ClientError) as err:
        client.complete("hello", 0)
    assert len(calls) == 3
    assert "secret-value" not in str(err.value)


def test_live_client_does_not_retry_client_errors(monkeypatch):
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(401)

    client = _live(handler, monkeypatch)
    with pytest.raises(ClientError):
        client.complete("hello", 0)
    assert len(calls) == 1


def test_missing_credential_is_actionable(monkeypatch):
    monkeypatch.delenv("ABSENT_KEY_VAR", raising=False)
    with pytest.raises(ClientError) as err:
        LiveClient(ModelClientConfig(mode="live", credential_env="ABSENT_KEY_VAR"))
    assert "ABSENT_KEY_VAR" in str(err.value) and "replay" in str(err.value)


def test_replay_needs_fixture_file(tmp_path):
    with pytest.raises(ValueError):
        ModelClientConfig(mode="replay")
    with pytest.raises(ClientError):
        make_client(f"replay:{tmp_path / 'missing.json'}")
    with pytest.raises(ValueError):
        make_client("bogus")
