"""Completion backends: HTTP completions endpoint and record/replay fixtures.

All backends serve ``CompletionRequest -> CompletionResponse``. The
module-level ``complete`` wrapper re-applies stop-pattern truncation on
the client side regardless of what the server did, so replayed fixtures
and live calls agree byte for byte. Requests are keyed by a sha256
digest over the prompt and every decoding setting; fixture files are
newline-delimited JSON records of digest, request summary, and response.
Credentials never enter fixtures: the HTTP backend reads its key from an
environment variable and stores only a prompt hash in recordings.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field

import requests


class BackendError(Exception):
    """Completion could not be obtained."""


class AuthError(BackendError):
    """The endpoint rejected the credential."""


class FixtureMissError(BackendError):
    """The replay fixture has no entry for the request digest."""

    def __init__(self, digest: str):
        super().__init__(f"no fixture entry for request digest {digest}")
        self.digest = digest


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_new_tokens: int = 128
    temperature: float = 0.0
    stop_patterns: tuple[str, ...] = ()
    model_id: str = "fixture-model"

    def __post_init__(self) -> None:
        if self.max_new_tokens <= 0:
            raise ValueError("max_new_tokens must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    finish_reason: str  # stop | length | error
    latency_ms: int = 0


def request_digest(req: CompletionRequest) -> str:
    """Hex digest covering the prompt and all decoding settings."""
    payload = {
        "prompt": req.prompt,
        "model_id": req.model_id,
        "max_new_tokens": req.max_new_tokens,
        "temperature": req.temperature,
        "stop_patterns": list(req.stop_patterns),
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def truncate_at_stop(text: str, stop_patterns: tuple[str, ...]) -> tuple[str, bool]:
    """Cut at the earliest occurrence of any stop pattern.

    Returns the truncated text and whether a pattern was found. The
    result contains no occurrence of any pattern, so applying this twice
    changes nothing.
    """
    cut = -1
    for pattern in stop_patterns:
        if not pattern:
            continue
        idx = text.find(pattern)
        if idx >= 0 and (cut < 0 or idx < cut):
            cut = idx
    if cut < 0:
        return text, False
    return text[:cut], True


def complete(backend, req: CompletionRequest) -> CompletionResponse:
    """Obtain a completion and enforce stop truncation client-side."""
    resp = backend.complete(req)
    text, hit = truncate_at_stop(resp.text, req.stop_patterns)
    finish = "stop" if hit else resp.finish_reason
    return CompletionResponse(text=text, finish_reason=finish, latency_ms=resp.latency_ms)


@dataclass
class HttpBackend:
    """OpenAI-style completions endpoint.

    POSTs {model, prompt, max_tokens, temperature, stop} to
    endpoint + path. The bearer token is read from the environment
    variable named by api_key_env at call time.
    """

    endpoint: str
    path: str = "/v1/completions"
    api_key_env: str = "EVARG_API_KEY"
    timeout_s: float = 60.0
    max_retries: int = 6
    backoff_base_s: float = 1.0
    backoff_cap_s: float = 32.0
    session: requests.Session = field(default_factory=requests.Session, repr=False)

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        headers = {}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": req.model_id,
            "prompt": req.prompt,
            "max_tokens": req.max_new_tokens,
            "temperature": req.temperature,
            "stop": list(req.stop_patterns),
        }
        url = self.endpoint.rstrip("/") + self.path
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                delay = min(self.backoff_base_s * 2 ** (attempt - 1), self.backoff_cap_s)
                time.sleep(delay)
            started = time.monotonic()
            try:
                http = self.session.post(url, json=body, headers=headers, timeout=self.timeout_s)
            except requests.RequestException as exc:
                last_error = exc
                continue
            latency = int((time.monotonic() - started) * 1000)
            if http.status_code in (401, 403):
                raise AuthError(f"endpoint rejected credential (HTTP {http.status_code})")
            if http.status_code == 429 or http.status_code >= 500:
                last_error = BackendError(f"HTTP {http.status_code} from {url}")
                continue
            if http.status_code != 200:
                raise BackendError(f"HTTP {http.status_code} from {url}: {http.text[:200]}")
            try:
                choice = http.json()["choices"][0]
                text = choice["text"]
            except (ValueError, KeyError, IndexError) as exc:
                raise BackendError(f"malformed completion response: {exc}") from exc
            finish = choice.get("finish_reason")
            if finish not in ("stop", "length"):
                finish = "length"
            return CompletionResponse(text=text, finish_reason=finish, latency_ms=latency)
        raise BackendError(f"retries exhausted calling {url}: {last_error}")


class ReplayBackend:
    """Serves recorded responses by request digest; fully deterministic."""

    def __init__(self, fixture_path: str):
        self.fixture_path = fixture_path
        self._entries: dict[str, tuple[str, str]] = {}
        try:
            with open(fixture_path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        record = json.loads(line)
                        digest = record["digest"]
                        response = record["response"]
                        entry = (response["text"], response["finish_reason"])
                    except (ValueError, KeyError, TypeError) as exc:
                        raise BackendError(
                            f"{fixture_path}:{lineno}: bad fixture record: {exc}"
                        ) from exc
                    self._entries[digest] = entry
        except OSError as exc:
            raise BackendError(f"cannot read fixture file {fixture_path}: {exc}") from exc

    def __len__(self) -> int:
        return len(self._entries)

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        digest = request_digest(req)
        try:
            text, finish = self._entries[digest]
        except KeyError:
            raise FixtureMissError(digest) from None
        return CompletionResponse(text=text, finish_reason=finish, latency_ms=0)


class RecordingBackend:
    """Wraps a live backend and appends each new response to a fixture file."""

    def __init__(self, inner, fixture_path: str):
        self.inner = inner
        self.fixture_path = fixture_path
        self._lock = threading.Lock()
        self._seen: set[str] = set()
        if os.path.exists(fixture_path):
            for line in open(fixture_path, encoding="utf-8"):
                if line.strip():
                    self._seen.add(json.loads(line)["digest"])

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        resp = self.inner.complete(req)
        digest = request_digest(req)
        record = {
            "digest": digest,
            "request": {
                "model_id": req.model_id,
                "max_new_tokens": req.max_new_tokens,
                "temperature": req.temperature,
                "stop_patterns": list(req.stop_patterns),
                "prompt_sha256": hashlib.sha256(req.prompt.encode("utf-8")).hexdigest(),
                "prompt_chars": len(req.prompt),
            },
            "response": {"text": resp.text, "finish_reason": resp.finish_reason},
        }
        with self._lock:
            if digest not in self._seen:
                with open(self.fixture_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record, ensure_ascii=False) + "\n")
                self._seen.add(digest)
        return resp
