import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from evarg.client import (
    AuthError,
    BackendError,
    CompletionRequest,
    CompletionResponse,
    FixtureMissError,
    HttpBackend,
    RecordingBackend,
    ReplayBackend,
    complete,
    request_digest,
    truncate_at_stop,
)

REQ = CompletionRequest(prompt="hello", stop_patterns=('"""', "class"))


# --- digests ---------------------------------------------------------------


def test_digest_is_stable():
    assert request_digest(REQ) == request_digest(
        CompletionRequest(prompt="hello", stop_patterns=('"""', "class"))
    )
    assert len(request_digest(REQ)) == 64


def test_digest_covers_every_decoding_setting():
    variants = [
        CompletionRequest(prompt="hello!", stop_patterns=('"""', "class")),
        CompletionRequest(prompt="hello", stop_patterns=("class", '"""')),
        CompletionRequest(prompt="hello", stop_patterns=('"""', "class"), max_new_tokens=64),
        CompletionRequest(prompt="hello", stop_patterns=('"""', "class"), temperature=0.5),
        CompletionRequest(prompt="hello", stop_patterns=('"""', "class"), model_id="other"),
    ]
    digests = {request_digest(v) for v in variants} | {request_digest(REQ)}
    assert len(digests) == len(variants) + 1


def test_request_validation():
    with pytest.raises(ValueError):
        CompletionRequest(prompt="x", max_new_tokens=0)
    with pytest.raises(ValueError):
        CompletionRequest(prompt="x", temperature=-0.1)


# --- stop truncation -------------------------------------------------------


def test_truncate_cuts_at_earliest_pattern():
    text = 'a)\nprint("x")\nclass B'
    out, hit = truncate_at_stop(text, ("class", "print"))
    assert out == "a)\n"
    assert hit


def test_truncate_without_hit_returns_input():
    assert truncate_at_stop("abc", ("xyz",)) == ("abc", False)


def test_truncate_pattern_at_start_gives_empty():
    assert truncate_at_stop("# nothing", ("#",)) == ("", True)


def test_truncate_ignores_empty_pattern():
    assert truncate_at_stop("abc", ("", "b")) == ("a", True)


@given(
    st.text(max_size=80),
    st.lists(st.sampled_from(['"""', "class", "print", "#", "\n\n"]), max_size=4),
)
def test_truncate_idempotent_and_clean(text, patterns):
    pats = tuple(patterns)
    out, hit = truncate_at_stop(text, pats)
    assert text.startswith(out)
    assert hit == any(p in text for p in pats if p)
    for p in pats:
        if p:
            assert p not in out
    assert truncate_at_stop(out, pats) == (out, False)


def test_complete_wrapper_truncates_and_marks_stop():
    class Fixed:
        def complete(self, req):
            return CompletionResponse(text='x)\nclass Tail', finish_reason="length")

    resp = complete(Fixed(), REQ)
    assert resp.text == "x)\n"
    assert resp.finish_reason == "stop"


def test_complete_wrapper_keeps_backend_finish_when_no_hit():
    class Fixed:
        def complete(self, req):
            return CompletionResponse(text="plain", finish_reason="length")

    resp = complete(Fixed(), REQ)
    assert resp.text == "plain"
    assert resp.finish_reason == "length"


# --- replay ----------------------------------------------------------------


def _write_fixture(path, entries):
    with open(path, "w", encoding="utf-8") as fh:
        for digest, text, finish in entries:
            fh.write(
                json.dumps(
                    {"digest": digest, "response": {"text": text, "finish_reason": finish}}
                )
                + "\n"
            )


def test_replay_round_trip(tmp_path):
    path = tmp_path / "f.jsonl"
    _write_fixture(path, [(request_digest(REQ), "answer)", "stop")])
    backend = ReplayBackend(str(path))
    assert len(backend) == 1
    resp = backend.complete(REQ)
    assert (resp.text, resp.finish_reason) == ("answer)", "stop")


def test_replay_miss_carries_digest(tmp_path):
    path = tmp_path / "f.jsonl"
    _write_fixture(path, [])
    with pytest.raises(FixtureMissError) as err:
        ReplayBackend(str(path)).complete(REQ)
    assert err.value.digest == request_digest(REQ)
    assert err.value.digest in str(err.value)


def test_replay_last_entry_wins(tmp_path):
    path = tmp_path / "f.jsonl"
    digest = request_digest(REQ)
    _write_fixture(path, [(digest, "old", "stop"), (digest, "new", "stop")])
    backend = ReplayBackend(str(path))
    assert len(backend) == 1
    assert backend.complete(REQ).text == "new"


def test_replay_missing_file_is_backend_error(tmp_path):
    with pytest.raises(BackendError):
        ReplayBackend(str(tmp_path / "absent.jsonl"))


def test_replay_corrupt_line_reports_position(tmp_path):
    path = tmp_path / "f.jsonl"
    path.write_text('{"digest": "d", "response": {"text": "x", "finish_reason": "stop"}}\nnot json\n')
    with pytest.raises(BackendError, match=":2"):
        ReplayBackend(str(path))


def test_shipped_fixture_loads(fixtures_dir):
    backend = ReplayBackend(str(fixtures_dir / "completions.jsonl"))
    assert len(backend) == 24


# --- HTTP backend against a local stub -------------------------------------


def _fast_backend(stub, **kwargs):
    kwargs.setdefault("backoff_base_s", 0.01)
    kwargs.setdefault("backoff_cap_s", 0.02)
    return HttpBackend(endpoint=stub.url, **kwargs)


def test_http_posts_openai_shaped_body(stub, monkeypatch):
    monkeypatch.delenv("EVARG_API_KEY", raising=False)
    stub.script.append(
        (200, {"choices": [{"text": "agent=)", "finish_reason": "stop"}]})
    )
    resp = _fast_backend(stub).complete(REQ)
    assert resp.text == "agent=)"
    assert resp.finish_reason == "stop"
    sent = stub.requests[0]
    assert sent["path"] == "/v1/completions"
    assert sent["auth"] is None
    assert sent["body"] == {
        "model": "fixture-model",
        "prompt": "hello",
        "max_tokens": 128,
        "temperature": 0.0,
        "stop": ['"""', "class"],
    }


def test_http_sends_bearer_token_from_env(stub, monkeypatch):
    monkeypatch.setenv("EVARG_API_KEY", "sk-test-secret-123")
    _fast_backend(stub).complete(REQ)
    assert stub.requests[0]["auth"] == "Bearer sk-test-secret-123"


def test_http_auth_failure_is_not_retried(stub, monkeypatch):
    monkeypatch.delenv("EVARG_API_KEY", raising=False)
    stub.script.append((401, {"error": "no"}))
    with pytest.raises(AuthError):
        _fast_backend(stub).complete(REQ)
    assert len(stub.requests) == 1


def test_http_retries_server_errors_then_succeeds(stub, monkeypatch):
    monkeypatch.delenv("EVARG_API_KEY", raising=False)
    stub.script.extend(
        [
            (500, {"error": "boom"}),
            (429, {"error": "slow down"}),
            (200, {"choices": [{"text": "late", "finish_reason": "stop"}]}),
        ]
    )
    resp = _fast_backend(stub).complete(REQ)
    assert resp.text == "late"
    assert len(stub.requests) == 3


def test_http_retries_exhausted(stub, monkeypatch):
    monkeypatch.delenv("EVARG_API_KEY", raising=False)
    stub.script.extend([(500, {}), (500, {})])
    with pytest.raises(BackendError, match="retries exhausted"):
        _fast_backend(stub, max_retries=1).complete(REQ)
    assert len(stub.requests) == 2


def test_http_client_error_fails_immediately(stub, monkeypatch):
    monkeypatch.delenv("EVARG_API_KEY", raising=False)
    stub.script.append((400, {"error": "bad request"}))
    with pytest.raises(BackendError, match="HTTP 400"):
        _fast_backend(stub).complete(REQ)
    assert len(stub.requests) == 1


def test_http_malformed_success_body(stub, monkeypatch):
    monkeypatch.delenv("EVARG_API_KEY", raising=False)
    stub.script.append((200, {"unexpected": True}))
    with pytest.raises(BackendError, match="malformed"):
        _fast_backend(stub).complete(REQ)


def test_http_unknown_finish_reason_normalized(stub, monkeypatch):
    monkeypatch.delenv("EVARG_API_KEY", raising=False)
    stub.script.append((200, {"choices": [{"text": "x"}]}))
    assert _fast_backend(stub).complete(REQ).finish_reason == "length"


def test_http_connection_refused_retries_then_fails():
    backend = HttpBackend(
        endpoint="http://127.0.0.1:9", max_retries=1, backoff_base_s=0.01
    )
    with pytest.raises(BackendError, match="retries exhausted"):
        backend.complete(REQ)


# --- record then replay ----------------------------------------------------


def test_record_then_replay_is_byte_identical(stub, tmp_path, monkeypatch):
    monkeypatch.setenv("EVARG_API_KEY", "sk-test-secret-123")
    raw = 'x=[PER("a")])\nclass Extra:\n    pass'
    stub.script.append((200, {"choices": [{"text": raw, "finish_reason": "stop"}]}))
    path = tmp_path / "rec.jsonl"

    recorder = RecordingBackend(_fast_backend(stub), str(path))
    live = complete(recorder, REQ)
    assert live.text == 'x=[PER("a")])\n'

    replayed = complete(ReplayBackend(str(path)), REQ)
    assert (replayed.text, replayed.finish_reason) == (live.text, live.finish_reason)


def test_recording_dedupes_identical_requests(stub, tmp_path, monkeypatch):
    monkeypatch.delenv("EVARG_API_KEY", raising=False)
    path = tmp_path / "rec.jsonl"
    recorder = RecordingBackend(_fast_backend(stub), str(path))
    recorder.complete(REQ)
    recorder.complete(REQ)
    recorder.complete(CompletionRequest(prompt="other"))
    lines = path.read_text().splitlines()
    assert len(lines) == 2


def test_recordings_hold_no_prompt_or_credentials(stub, tmp_path, monkeypatch):
    monkeypatch.setenv("EVARG_API_KEY", "sk-test-secret-123")
    secret_prompt = "do not store this prompt text"
    path = tmp_path / "rec.jsonl"
    recorder = RecordingBackend(_fast_backend(stub), str(path))
    recorder.complete(CompletionRequest(prompt=secret_prompt))

    content = path.read_text()
    assert "sk-test-secret-123" not in content
    assert secret_prompt not in content
    record = json.loads(content)
    assert set(record) == {"digest", "request", "response"}
    assert set(record["request"]) == {
        "model_id",
        "max_new_tokens",
        "temperature",
        "stop_patterns",
        "prompt_sha256",
        "prompt_chars",
    }
    assert record["request"]["prompt_chars"] == len(secret_prompt)


def test_shipped_fixture_holds_no_prompts(fixtures_dir):
    for line in (fixtures_dir / "completions.jsonl").read_text().splitlines():
        record = json.loads(line)
        assert "prompt" not in record.get("request", {})
        assert set(record["response"]) == {"text", "finish_reason"}
