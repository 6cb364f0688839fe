"""Backend tests: scripted determinism, HTTP wire behavior, retries."""

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from taskplan.errors import ScriptExhausted, Timeout, Transport
from taskplan.llm import (
    HttpBackend,
    InferenceParams,
    ScriptedBackend,
    complete,
    conversation_to_messages,
)
from taskplan.prompts import Conversation

PARAMS = InferenceParams()


def conv(*texts):
    turns = []
    for i, t in enumerate(texts):
        turns.append(("user" if i % 2 == 0 else "assistant", t))
    return Conversation(tuple(turns), 0)


# ---------------------------------------------------------------------------
# Params
# ---------------------------------------------------------------------------


def test_params_validation():
    with pytest.raises(ValueError):
        InferenceParams(temperature=2.5)
    with pytest.raises(ValueError):
        InferenceParams(max_response_tokens=0)
    assert InferenceParams(temperature=2.0).temperature == 2.0


# ---------------------------------------------------------------------------
# Scripted backend
# ---------------------------------------------------------------------------


def test_scripted_sequential_consumption():
    backend = ScriptedBackend.from_list([{"response": "first"}, {"response": "second"}])
    assert complete(conv("hi"), PARAMS, backend) == "first"
    assert complete(conv("hi"), PARAMS, backend) == "second"
    with pytest.raises(ScriptExhausted):
        complete(conv("hi"), PARAMS, backend)


def test_scripted_matcher_is_reusable():
    backend = ScriptedBackend.from_list(
        [{"match": "juice", "response": "juice plan"}, {"match": "spam", "response": "spam plan"}]
    )
    assert complete(conv("move the juice"), PARAMS, backend) == "juice plan"
    assert complete(conv("toss the spam"), PARAMS, backend) == "spam plan"
    assert complete(conv("more juice please"), PARAMS, backend) == "juice plan"


def test_scripted_matches_last_user_turn_only():
    backend = ScriptedBackend.from_list([{"match": "juice", "response": "ok"}])
    c = conv("about juice", "noted", "about spam")
    with pytest.raises(ScriptExhausted):
        complete(c, PARAMS, backend)


def test_client_does_not_mutate_conversation():
    c = conv("a", "b", "c")
    before = tuple(c.turns)
    backend = ScriptedBackend.from_list([{"response": "x"}])
    complete(c, PARAMS, backend)
    assert c.turns == before


def test_system_first_mapping():
    c = conv("role prompt", "ack", "query")
    messages = conversation_to_messages(c, system_first=True)
    assert messages[0]["role"] == "system"
    assert conversation_to_messages(c)[0]["role"] == "user"


# ---------------------------------------------------------------------------
# HTTP backend against a local stub server
# ---------------------------------------------------------------------------


class _StubHandler(BaseHTTPRequestHandler):
    script = []  # list of (status, body) consumed per request
    requests_seen = []

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        _StubHandler.requests_seen.append({"body": body, "auth": self.headers.get("Authorization")})
        status, payload = _StubHandler.script.pop(0)
        blob = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(blob)))
        self.end_headers()
        self.wfile.write(blob)

    def log_message(self, *args):
        pass


@pytest.fixture()
def stub_server():
    _StubHandler.script = []
    _StubHandler.requests_seen = []
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/v1/chat/completions", _StubHandler
    server.shutdown()


def _ok_payload(text):
    return {"choices": [{"message": {"role": "assistant", "content": text}}]}


def test_http_success_and_payload_shape(stub_server):
    url, handler = stub_server
    handler.script = [(200, _ok_payload("hello plan"))]
    backend = HttpBackend(endpoint=url, api_key="sk-test")
    out = complete(conv("do it"), InferenceParams(temperature=1.5, seed=3), backend)
    assert out == "hello plan"
    sent = handler.requests_seen[0]
    assert sent["auth"] == "Bearer sk-test"
    assert sent["body"]["temperature"] == 1.5
    assert sent["body"]["seed"] == 3
    assert sent["body"]["messages"][-1] == {"role": "user", "content": "do it"}


def test_http_401_surfaces_verbatim(stub_server):
    url, handler = stub_server
    handler.script = [(401, {"error": "bad key"})]
    backend = HttpBackend(endpoint=url, api_key="wrong")
    with pytest.raises(Transport) as exc:
        complete(conv("x"), PARAMS, backend)
    assert exc.value.status == 401
    assert "bad key" in exc.value.body


def test_http_retries_transient_then_succeeds(stub_server):
    url, handler = stub_server
    handler.script = [(503, {"error": "busy"}), (200, _ok_payload("recovered"))]
    backend = HttpBackend(endpoint=url, api_key="k", _sleep=lambda s: None)
    assert complete(conv("x"), PARAMS, backend) == "recovered"
    assert len(handler.requests_seen) == 2


def test_http_gives_up_after_three_tries(stub_server):
    url, handler = stub_server
    handler.script = [(503, {}), (503, {}), (503, {})]
    backend = HttpBackend(endpoint=url, api_key="k", _sleep=lambda s: None)
    with pytest.raises(Transport) as exc:
        complete(conv("x"), PARAMS, backend)
    assert exc.value.status == 503
    assert len(handler.requests_seen) == 3


def test_http_timeout_maps_to_timeout_error():
    backend = HttpBackend(endpoint="http://127.0.0.1:9", api_key="k", timeout=0.05, _sleep=lambda s: None)
    with pytest.raises((Timeout, Transport)):
        complete(conv("x"), PARAMS, backend)
