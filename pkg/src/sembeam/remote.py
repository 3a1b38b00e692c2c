"""Remote scorer wire protocol: HTTP client with retries and the bundled mock.

Protocol: POST /score with JSON
``{"utterance": str, "candidates": [str], "examples": [{"utterance", "plan"}]?}``
and a 200 response ``{"scores": [number]}`` with one finite score per
candidate, order-aligned. Plan strings on the wire, never ASTs.
"""

from __future__ import annotations

import functools
import json
import math
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Sequence

import requests

from .errors import NonFiniteScore, ProtocolError, TransportError
from .plans import Plan, parse_plan, render_plan
from .scoring import lexical_score

DEFAULT_TIMEOUT = 30.0
DEFAULT_RETRIES = 2
DEFAULT_BACKOFF = 0.5


@dataclass(frozen=True)
class ScoreRequest:
    """One scoring batch: candidates are canonical plan strings."""

    utterance: str
    candidates: tuple
    in_context_examples: tuple | None = None

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("candidates must be non-empty")
        if len(set(self.candidates)) != len(self.candidates):
            raise ValueError("duplicate candidates in score request")

    def to_json(self) -> dict:
        body = {"utterance": self.utterance, "candidates": list(self.candidates)}
        if self.in_context_examples is not None:
            body["examples"] = [
                {"utterance": u, "plan": p} for u, p in self.in_context_examples
            ]
        return body


def remote_score(
    endpoint: str,
    request: ScoreRequest,
    timeout: float = DEFAULT_TIMEOUT,
    retries: int = DEFAULT_RETRIES,
    backoff: float = DEFAULT_BACKOFF,
    session: requests.Session | None = None,
) -> list:
    """POST a score request; returns one finite float per candidate.

    Transport failures (connection errors, timeouts, non-200 statuses) are
    retried with exponential backoff; TransportError after the retry budget.
    Malformed 200 responses raise ProtocolError immediately.
    """
    http = session if session is not None else requests
    url = endpoint.rstrip("/") + "/score"
    last_failure = None
    for attempt in range(retries + 1):
        if attempt:
            time.sleep(backoff * 2 ** (attempt - 1))
        try:
            response = http.post(url, json=request.to_json(), timeout=timeout)
        except requests.RequestException as exc:
            last_failure = str(exc)
            continue
        if response.status_code != 200:
            last_failure = f"status {response.status_code}"
            continue
        return _parse_scores(response, len(request.candidates))
    raise TransportError(f"scorer at {url} failed after {retries + 1} attempts: {last_failure}")


def _parse_scores(response, expected: int) -> list:
    try:
        payload = response.json()
    except ValueError as exc:
        raise ProtocolError(f"response is not JSON: {exc}") from exc
    scores = payload.get("scores") if isinstance(payload, dict) else None
    if not isinstance(scores, list):
        raise ProtocolError("response lacks a 'scores' array")
    if len(scores) != expected:
        raise ProtocolError(f"expected {expected} scores, got {len(scores)}")
    out = []
    for value in scores:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ProtocolError(f"non-numeric score {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise NonFiniteScore(f"non-finite score {value!r}")
        out.append(value)
    return out


class RemoteScorer:
    """Batch scorer speaking the wire protocol; plugs into search like local scorers."""

    name = "remote"

    def __init__(
        self,
        endpoint: str,
        timeout: float = DEFAULT_TIMEOUT,
        retries: int = DEFAULT_RETRIES,
        backoff: float = DEFAULT_BACKOFF,
        examples: Sequence | None = None,
    ):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.examples = tuple(examples) if examples is not None else None
        self.session = requests.Session()

    def score_batch(self, utterance: str, candidates: Sequence[Plan]) -> list:
        request = ScoreRequest(
            utterance=utterance,
            candidates=tuple(render_plan(c) for c in candidates),
            in_context_examples=self.examples,
        )
        return remote_score(
            self.endpoint,
            request,
            timeout=self.timeout,
            retries=self.retries,
            backoff=self.backoff,
            session=self.session,
        )


# --- bundled mock server ----------------------------------------------------

@functools.lru_cache(maxsize=65536)
def _parsed(plan_text: str):
    return parse_plan(plan_text)


@functools.lru_cache(maxsize=65536)
def _cached_lexical(utterance: str, plan_text: str) -> float:
    return lexical_score(utterance, _parsed(plan_text))


class _MockHandler(BaseHTTPRequestHandler):
    """Serves lexical_score behind the wire protocol; used for integration tests."""

    def do_POST(self):  # noqa: N802 (http.server API)
        server: MockScorerServer = self.server  # type: ignore[assignment]
        if self.path.rstrip("/") != "/score":
            self.send_error(404)
            return
        if server.take_flaky_failure():
            self.send_error(500, "injected transport failure")
            return
        length = int(self.headers.get("Content-Length", "0"))
        try:
            body = json.loads(self.rfile.read(length))
            utterance = body["utterance"]
            candidates = body["candidates"]
            scores = [_cached_lexical(utterance, c) for c in candidates]
        except Exception as exc:
            self.send_error(400, f"bad request: {exc}")
            return
        payload = json.dumps({"scores": scores}).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, fmt, *args):  # keep test output quiet
        pass


class MockScorerServer(ThreadingHTTPServer):
    """Embeddable mock: ``flaky`` makes every other request fail with a 500."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0, flaky: bool = False):
        super().__init__((host, port), _MockHandler)
        self.flaky = flaky
        self._lock = threading.Lock()
        self._request_count = 0

    def take_flaky_failure(self) -> bool:
        with self._lock:
            self._request_count += 1
            return self.flaky and self._request_count % 2 == 1

    @property
    def endpoint(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread


def run_mock_scorer(host: str, port: int, flaky: bool = False) -> None:
    """Run the mock scorer until interrupted (the ``mock-scorer`` CLI command)."""
    server = MockScorerServer(host, port, flaky=flaky)
    print(f"mock scorer listening on {server.endpoint} (flaky={flaky})", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
