import json

import httpx
import numpy as np
import pytest

from finegrain.agents.backends import (BackendError, ForesightScript, HashScript, LiveBackend, LiveEmbedder,
                                       ReplayBackend, RequestContext, ScriptedBackend, load_backend, prompt_hash)
from finegrain.agents.reports import ROLE_SPECS, parse_report

CTX = RequestContext("technical", "2024-01", "fine", "1001")


def chat_reply(text):
    return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": text}}]})


def test_hash_script_is_pure_and_valid():
    b = ScriptedBackend()
    for role in ROLE_SPECS:
        ctx = RequestContext(role, "2024-01", "coarse", None if role == "macro" else "1001")
        out = b.send("sys", "user momentum", ctx)
        assert out == b.send("sys", "user momentum", ctx)
        parse_report(role, out)
    # trial index does not enter the key
    assert b.send("s", "u", CTX) == b.send("s", "u", RequestContext("technical", "2024-01", "fine", "1001", trial=5))


def test_hash_script_scores_depend_on_prompt():
    b = ScriptedBackend()
    scores = {parse_report("technical", b.send("s", f"prompt {i}", CTX)).score for i in range(40)}
    assert len(scores) > 10


def test_noise_only_hits_first_attempt():
    b = ScriptedBackend(HashScript(noise=1.0))
    with pytest.raises(Exception):
        parse_report("technical", b.send("s", "u", CTX))
    retry = RequestContext("technical", "2024-01", "fine", "1001", attempt=1)
    assert parse_report("technical", b.send("s", "u", retry)).score is not None


def test_foresight_ranks_forward_returns():
    fs = ForesightScript({"2024-01": {"A": 0.05, "B": -0.02, "C": 0.01}})
    assert [fs.score("2024-01", t) for t in "ABC"] == [100, 0, 50]
    rev = ForesightScript({"2024-01": {"A": 0.05, "B": -0.02, "C": 0.01}}, reverse=True)
    assert [rev.score("2024-01", t) for t in "ABC"] == [0, 100, 50]
    out = ScriptedBackend(fs).send("s", "u", RequestContext("pm", "2024-01", "fine", "A"))
    assert json.loads(out)["final_score"] == 100


def test_live_backend_request_and_retries():
    seen = []
    replies = iter([httpx.Response(503), httpx.Response(429), chat_reply('{"score": 61, "reason": "x"}')])

    def handler(request):
        seen.append(json.loads(request.content))
        return next(replies)

    sleeps = []
    client = httpx.Client(transport=httpx.MockTransport(handler))
    b = LiveBackend("http://llm/v1/chat/completions", "m1", client=client, sleep=sleeps.append, backoff=0.5)
    assert b.send("SYS", "USER", CTX) == '{"score": 61, "reason": "x"}'
    assert len(seen) == 3 and sleeps == [0.5, 1.0]
    body = seen[0]
    assert body["temperature"] == 1.0 and body["model"] == "m1"
    assert body["messages"] == [{"role": "system", "content": "SYS"}, {"role": "user", "content": "USER"}]


def test_live_backend_gives_up_and_fails_fast():
    client = httpx.Client(transport=httpx.MockTransport(lambda r: httpx.Response(500)))
    b = LiveBackend("http://x", "m", client=client, sleep=lambda s: None, max_retries=2)
    with pytest.raises(BackendError, match="3 attempts"):
        b.send("s", "u", CTX)
    calls = []

    def bad_request(r):
        calls.append(1)
        return httpx.Response(400, text="nope")

    b = LiveBackend("http://x", "m", client=httpx.Client(transport=httpx.MockTransport(bad_request)),
                    sleep=lambda s: None)
    with pytest.raises(BackendError, match="400"):
        b.send("s", "u", CTX)
    assert len(calls) == 1
    b = LiveBackend("http://x", "m", client=httpx.Client(transport=httpx.MockTransport(
        lambda r: httpx.Response(200, json={"oops": 1}))))
    with pytest.raises(BackendError, match="malformed"):
        b.send("s", "u", CTX)


def test_live_backend_retries_transport_errors():
    n = {"k": 0}

    def flaky(request):
        n["k"] += 1
        if n["k"] == 1:
            raise httpx.ConnectError("down")
        return chat_reply("ok")

    b = LiveBackend("http://x", "m", client=httpx.Client(transport=httpx.MockTransport(flaky)), sleep=lambda s: None)
    assert b.send("s", "u", CTX) == "ok"


def test_live_embedder_orders_and_normalises():
    def handler(request):
        body = json.loads(request.content)
        assert body["input"] == ["a", "b"]
        return httpx.Response(200, json={"data": [{"index": 1, "embedding": [0, 2]}, {"index": 0, "embedding": [3, 4]}]})

    e = LiveEmbedder("http://x", client=httpx.Client(transport=httpx.MockTransport(handler)))
    v = e.embed(["a", "b"])
    assert np.allclose(v, [[0.6, 0.8], [0, 1]])


def test_replay_reproduces_recorded_run(tmp_path):
    from finegrain.agents.pipeline import AgentPipeline
    from finegrain.agents.transcripts import TranscriptStore

    store = TranscriptStore(tmp_path)
    p = AgentPipeline(ScriptedBackend(HashScript(noise=0.3)), store)
    first = [p.call("technical", "fine", "2024-01", f"T{i}", "sys", f"user {i}") for i in range(10)]
    replay = AgentPipeline(ReplayBackend(tmp_path), TranscriptStore())
    again = [replay.call("technical", "fine", "2024-01", f"T{i}", "sys", f"user {i}") for i in range(10)]
    assert [r.to_dict() for r in first] == [r.to_dict() for r in again]
    with pytest.raises(BackendError, match="drift"):
        ReplayBackend(tmp_path).send("sys", "changed", RequestContext("technical", "2024-01", "fine", "T0"))
    with pytest.raises(BackendError, match="no recorded"):
        ReplayBackend(tmp_path).send("sys", "user 0", RequestContext("technical", "2030-01", "fine", "T0"))


def test_load_backend_modes(tmp_path, monkeypatch):
    assert isinstance(load_backend({"mode": "scripted", "noise": 0.1}), ScriptedBackend)
    assert isinstance(load_backend({"mode": "replay", "dir": str(tmp_path)}), ReplayBackend)
    monkeypatch.setenv("OPENAI_API_KEY", "k")
    live = load_backend({"mode": "live", "endpoint": "http://x", "model": "m"})
    assert isinstance(live, LiveBackend) and live.temperature == 1.0
    with pytest.raises(ValueError):
        load_backend({"mode": "psychic"})


def test_prompt_hash_separates_fields():
    assert prompt_hash("ab", "c") != prompt_hash("a", "bc")
