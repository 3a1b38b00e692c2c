import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from sembeam.errors import NonFiniteScore, ProtocolError, TransportError
from sembeam.plans import parse_plan, render_plan
from sembeam.remote import MockScorerServer, RemoteScorer, ScoreRequest, remote_score
from sembeam.scoring import lexical_score

FAST = dict(timeout=2.0, retries=2, backoff=0.01)


@pytest.fixture()
def mock_server():
    server = MockScorerServer()
    server.start_background()
    yield server
    server.shutdown()
    server.server_close()


def _canned_server(make_body, status=200):
    """A tiny server returning a fixed payload; returns (server, endpoint)."""

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", "0"))
            request = json.loads(self.rfile.read(length))
            body = make_body(request)
            payload = body.encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def log_message(self, fmt, *args):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    host, port = server.server_address[:2]
    return server, f"http://{host}:{port}"


def test_score_request_validates():
    with pytest.raises(ValueError):
        ScoreRequest("u", ())
    with pytest.raises(ValueError):
        ScoreRequest("u", ("a", "a"))


def test_mock_scores_match_lexical(mock_server):
    plans = ["(JOIN emulates java)", "(AND Language java)", "java"]
    request = ScoreRequest("which emulators emulate java", tuple(plans))
    scores = remote_score(mock_server.endpoint, request, **FAST)
    expected = [
        lexical_score("which emulators emulate java", parse_plan(p)) for p in plans
    ]
    assert scores == expected


def test_score_count_mismatch_is_protocol_error():
    server, endpoint = _canned_server(lambda req: json.dumps({"scores": [1.0, 2.0]}))
    try:
        with pytest.raises(ProtocolError):
            remote_score(endpoint, ScoreRequest("u", ("a", "b", "c")), **FAST)
    finally:
        server.shutdown()


def test_malformed_body_is_protocol_error():
    server, endpoint = _canned_server(lambda req: "this is not json")
    try:
        with pytest.raises(ProtocolError):
            remote_score(endpoint, ScoreRequest("u", ("a",)), **FAST)
    finally:
        server.shutdown()


def test_non_finite_score_rejected():
    server, endpoint = _canned_server(lambda req: json.dumps({"scores": [float("nan")]}))
    try:
        with pytest.raises(NonFiniteScore):
            remote_score(endpoint, ScoreRequest("u", ("a",)), **FAST)
    finally:
        server.shutdown()


def test_unreachable_endpoint_is_transport_error():
    with pytest.raises(TransportError):
        remote_score("http://127.0.0.1:9", ScoreRequest("u", ("a",)), **FAST)


def test_flaky_server_recovers_via_retry():
    server = MockScorerServer(flaky=True)
    server.start_background()
    try:
        request = ScoreRequest("who knows java", ("(JOIN knows java)",))
        scores = remote_score(server.endpoint, request, **FAST)
        assert scores == [lexical_score("who knows java", parse_plan("(JOIN knows java)"))]
    finally:
        server.shutdown()
        server.server_close()


def test_remote_scorer_batch_matches_local(mock_server):
    plans = [parse_plan(t) for t in ("(JOIN knows java)", "(AND Person alice)")]
    scorer = RemoteScorer(mock_server.endpoint, timeout=2.0, backoff=0.01)
    got = scorer.score_batch("who knows java", plans)
    assert got == [lexical_score("who knows java", p) for p in plans]


def test_remote_scorer_sends_examples(mock_server):
    scorer = RemoteScorer(
        mock_server.endpoint, timeout=2.0, backoff=0.01,
        examples=[("q", "(JOIN knows java)")],
    )
    # the mock ignores examples; this verifies the request wire shape is accepted
    plans = [parse_plan("(JOIN knows java)")]
    assert scorer.score_batch("who", plans) == [lexical_score("who", plans[0])]
    body = ScoreRequest("who", (render_plan(plans[0]),),
                        in_context_examples=(("q", "(JOIN knows java)"),)).to_json()
    assert body["examples"] == [{"utterance": "q", "plan": "(JOIN knows java)"}]
