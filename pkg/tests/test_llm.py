import json

import httpx
import pytest
from hypothesis import given, strategies as st

from peermirror.llm import (
    CompletionRequest, ConfigurationError, FixtureNotFound, FixtureStore, LLMClient, Message,
    OpenAIChatBackend, RetryPolicy, TransportError,
)


def req(text="hello", temperature=0.0, **kw):
    return CompletionRequest.user("gpt-4o", text, temperature=temperature, **kw)


def test_request_validation():
    with pytest.raises(ValueError):
        CompletionRequest("m", ())
    with pytest.raises(ValueError):
        req(temperature=2.5)
    with pytest.raises(ValueError):
        CompletionRequest("m", (Message("robot", "x"),))
    with pytest.raises(ValueError):
        req(max_output_tokens=0)


def test_fingerprint_ignores_max_tokens_but_not_temperature():
    assert req(max_output_tokens=5).fingerprint == req(max_output_tokens=500).fingerprint
    assert req(temperature=0).fingerprint != req(temperature=0.7).fingerprint
    assert req(temperature=0).fingerprint == req(temperature=0.0).fingerprint


@given(st.text(min_size=0, max_size=50), st.floats(0, 2), st.integers(1, 4096))
def test_fingerprint_survives_serialization(text, temp, tokens):
    r = CompletionRequest("m", (Message("system", "s"), Message("user", text)), temp, tokens)
    again = CompletionRequest.from_dict(json.loads(json.dumps(r.to_dict())))
    assert again == r and again.fingerprint == r.fingerprint


def test_replay_hit_and_miss(tmp_path):
    path = tmp_path / "f.jsonl"
    rec = LLMClient(lambda r: "stored ✓", "record", FixtureStore(path))
    assert rec.complete(req()) == "stored ✓"
    replay = LLMClient(None, "replay", FixtureStore(path))
    assert replay.complete(req()) == "stored ✓"
    with pytest.raises(FixtureNotFound) as info:
        replay.complete(req("other"))
    assert info.value.fingerprint == req("other").fingerprint


def test_fixture_file_shape(tmp_path):
    path = tmp_path / "f.jsonl"
    LLMClient(lambda r: "out", "record", FixtureStore(path)).complete(req())
    (line,) = path.read_text("utf-8").splitlines()
    rec = json.loads(line)
    assert set(rec) == {"fingerprint", "request", "response"}
    assert rec["fingerprint"] == req().fingerprint
    assert CompletionRequest.from_dict(rec["request"]) == req()


def test_replay_serves_repeats_in_order(tmp_path):
    path = tmp_path / "f.jsonl"
    answers = iter(["one", "two", "one"])
    rec = LLMClient(lambda r: next(answers), "record", FixtureStore(path))
    for _ in range(3):
        rec.complete(req())
    assert len(path.read_text().splitlines()) == 2
    replay = LLMClient(None, "replay", FixtureStore(path))
    assert [replay.complete(req()) for _ in range(4)] == ["one", "two", "two", "two"]


def test_replay_is_pure_function_of_store(tmp_path):
    path = tmp_path / "f.jsonl"
    rec = LLMClient(lambda r: r.messages[0].content.upper(), "record", FixtureStore(path))
    for t in ["a", "b", "c"]:
        rec.complete(req(t))
    runs = []
    for _ in range(2):
        client = LLMClient(None, "replay", FixtureStore(path))
        runs.append([client.complete(req(t)) for t in ["c", "a", "b"]])
    assert runs[0] == runs[1] == ["C", "A", "B"]


def test_bad_fixture_line(tmp_path):
    path = tmp_path / "f.jsonl"
    path.write_text("{not json}\n")
    with pytest.raises(ValueError, match="f.jsonl:1"):
        FixtureStore(path)


def test_client_mode_checks():
    with pytest.raises(ConfigurationError):
        LLMClient(None, "replay")
    with pytest.raises(ConfigurationError):
        LLMClient(None, "live")
    with pytest.raises(ConfigurationError):
        LLMClient(lambda r: "", "sideways")


def test_missing_credentials_fail_before_network():
    with pytest.raises(ConfigurationError):
        OpenAIChatBackend(None)
    with pytest.raises(ConfigurationError):
        OpenAIChatBackend("")


def _backend(handler):
    return OpenAIChatBackend("k", "https://example.invalid/v1",
                             http_client=httpx.Client(transport=httpx.MockTransport(handler)))


def _ok(content="fine"):
    return httpx.Response(200, json={"choices": [{"message": {"content": content}}]})


def test_live_call_payload():
    seen = {}

    def handler(request):
        seen["url"] = str(request.url)
        seen["auth"] = request.headers["authorization"]
        seen["body"] = json.loads(request.content)
        return _ok("answer")

    out = _backend(handler)(req("hi", max_output_tokens=77))
    assert out == "answer"
    assert seen["url"] == "https://example.invalid/v1/chat/completions"
    assert seen["auth"] == "Bearer k"
    assert seen["body"]["max_tokens"] == 77
    assert seen["body"]["messages"] == [{"role": "user", "content": "hi"}]


def test_retries_with_backoff_then_success():
    statuses = iter([503, 429, 200])

    def handler(request):
        code = next(statuses)
        return _ok("late") if code == 200 else httpx.Response(code)

    sleeps = []
    client = LLMClient(_backend(handler), "live", sleep=sleeps.append)
    assert client.complete(req()) == "late"
    assert sleeps == [1.0, 2.0]


def test_gives_up_after_three_retries():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(500)

    sleeps = []
    client = LLMClient(_backend(handler), "live", sleep=sleeps.append)
    with pytest.raises(TransportError) as info:
        client.complete(req())
    assert sleeps == [1.0, 2.0, 4.0] and len(calls) == 4
    assert "4 attempt" in str(info.value)


def test_client_errors_are_not_retried():
    sleeps = []
    client = LLMClient(_backend(lambda r: httpx.Response(401, text="bad key")), "live", sleep=sleeps.append)
    with pytest.raises(TransportError, match="401"):
        client.complete(req())
    assert sleeps == []


def test_connection_errors_are_retried():
    attempts = []

    def handler(request):
        attempts.append(1)
        if len(attempts) == 1:
            raise httpx.ConnectError("refused", request=request)
        return _ok()

    sleeps = []
    assert LLMClient(_backend(handler), "live", sleep=sleeps.append).complete(req()) == "fine"
    assert sleeps == [1.0]


def test_malformed_body():
    client = LLMClient(_backend(lambda r: httpx.Response(200, json={"nope": 1})), "live", sleep=lambda s: None)
    with pytest.raises(TransportError, match="malformed"):
        client.complete(req())


def test_retry_policy_delays():
    assert RetryPolicy().delays() == [1.0, 2.0, 4.0]
    assert RetryPolicy(retries=2, base_delay=0.5).delays() == [0.5, 1.0]
