"""Service API tests against a scripted backend."""

import json

import pytest
from fastapi.testclient import TestClient

from taskplan.api import create_app
from taskplan.llm import InferenceParams, ScriptedBackend
from taskplan.replay import FEEDBACK_DEMO_INSERT, SHELF_ENVIRONMENT, SHELF_SESSION, script_path


@pytest.fixture()
def client(tmp_path):
    backend = ScriptedBackend.from_file(script_path("lfo_shelf_session.json"))
    app = create_app(str(tmp_path / "sessions"), backend, InferenceParams())
    with TestClient(app) as c:
        yield c


@pytest.fixture()
def demo_client(tmp_path):
    backend = ScriptedBackend.from_file(script_path("lfo_feedback_demo.json"))
    app = create_app(str(tmp_path / "sessions"), backend, InferenceParams())
    with TestClient(app) as c:
        yield c


def _create(client):
    response = client.post("/sessions", json={"environment": SHELF_ENVIRONMENT, "action_set": "lfo"})
    assert response.status_code == 201
    return response.json()["session_id"]


def test_create_session_returns_id(client):
    session_id = _create(client)
    assert session_id
    summary = client.get(f"/sessions/{session_id}").json()
    assert summary["current_environment"]["objects"] == ["<spam>", "<juice>"]
    assert summary["exchanges"] == []


def test_unknown_session_is_404(client):
    assert client.get("/sessions/nope").status_code == 404
    response = client.post("/sessions/nope/instruction", json={"text": "x"})
    assert response.status_code == 404
    assert response.json()["code"] == "session_not_found"


def test_invalid_environment_is_422(client):
    response = client.post(
        "/sessions",
        json={"environment": {"assets": ["<a>"], "asset_states": {}, "objects": ["<a>"], "object_states": {}}},
    )
    assert response.status_code == 422
    assert response.json()["code"] == "schema_violation"


def test_instruction_runs_loop_and_returns_result(client):
    session_id = _create(client)
    response = client.post(
        f"/sessions/{session_id}/instruction",
        json={"text": "Put the juice on top of the shelf.", "max_rounds": 3},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["outcome"] == "success"
    assert body["rounds_used"] == 0
    assert body["final_plan"]["task_cohesion"]["object_name"] == "<juice>"

    status = client.get(f"/sessions/{session_id}/status").json()
    assert status["running"] is False


def test_approve_flow_and_trace(client):
    session_id = _create(client)
    client.post(f"/sessions/{session_id}/instruction", json={"text": "Put the juice on top of the shelf."})
    response = client.post(
        f"/sessions/{session_id}/approve", json={"attempt_ref": {"exchange": 0, "attempt": 0}}
    )
    assert response.status_code == 200
    summary = response.json()
    assert summary["current_environment"]["object_states"]["<juice>"] == "on_something(<shelf_top>)"
    assert summary["exchanges"][0]["approved_attempt"] == 0

    trace = client.get(f"/sessions/{session_id}/trace/1").json()
    assert trace["step"] == 1
    assert [r["ok"] for r in trace["records"]] == [True] * 6

    assert client.get(f"/sessions/{session_id}/trace/2").status_code == 404


def test_approve_stale_attempt_is_409(client):
    session_id = _create(client)
    client.post(f"/sessions/{session_id}/instruction", json={"text": "Put the juice on top of the shelf."})
    response = client.post(
        f"/sessions/{session_id}/approve", json={"attempt_ref": {"exchange": 5, "attempt": 0}}
    )
    assert response.status_code == 409
    assert response.json()["code"] == "stale_attempt"


def test_feedback_endpoint_passes_text_verbatim(demo_client):
    session_id = _create(demo_client)
    demo_client.post(f"/sessions/{session_id}/instruction", json={"text": "Put the juice on top of the shelf."})
    response = demo_client.post(f"/sessions/{session_id}/feedback", json={"text": FEEDBACK_DEMO_INSERT})
    assert response.status_code == 200
    body = response.json()
    assert body["outcome"] == "success"
    assert len(body["final_plan"]["task_cohesion"]["task_sequence"]) == 7

    summary = demo_client.get(f"/sessions/{session_id}").json()
    attempts = summary["exchanges"][0]["attempts"]
    assert attempts[0]["feedback"]["source"] == "human"
    assert attempts[0]["feedback"]["text"] == FEEDBACK_DEMO_INSERT


def test_summary_exposes_env_diffs(client):
    session_id = _create(client)
    client.post(f"/sessions/{session_id}/instruction", json={"text": "Put the juice on top of the shelf."})
    summary = client.get(f"/sessions/{session_id}").json()
    diff = summary["exchanges"][0]["attempts"][0]["env_diff"]
    assert diff["changed"][0]["name"] == "<juice>"
    assert diff["changed"][0]["added"] == ["on_something(<shelf_top>)"]


def test_whole_shelf_session_over_http(client):
    session_id = _create(client)
    for instruction, _obj, _actions in SHELF_SESSION["steps"]:
        body = client.post(f"/sessions/{session_id}/instruction", json={"text": instruction}).json()
        assert body["outcome"] == "success"
        exchange_index = len(client.get(f"/sessions/{session_id}").json()["exchanges"]) - 1
        attempt_index = len(body["transcript"]) - 1
        approve = client.post(
            f"/sessions/{session_id}/approve",
            json={"attempt_ref": {"exchange": exchange_index, "attempt": attempt_index}},
        )
        assert approve.status_code == 200
    final = client.get(f"/sessions/{session_id}").json()["current_environment"]
    assert final["object_states"]["<spam>"] == "on_something(<trash_bin>)"
    assert final["object_states"]["<juice>"] == "on_something(<trash_bin>)"


def test_responses_rederivable_from_store(client, tmp_path):
    """The API is a veneer: summaries equal what the store reconstructs."""
    session_id = _create(client)
    client.post(f"/sessions/{session_id}/instruction", json={"text": "Put the juice on top of the shelf."})
    client.post(f"/sessions/{session_id}/approve", json={"attempt_ref": {"exchange": 0, "attempt": 0}})

    from taskplan.api import session_summary
    from taskplan.sessions import SessionStore

    store = SessionStore(tmp_path / "sessions")
    offline = session_summary(store.load(session_id))
    online = client.get(f"/sessions/{session_id}").json()
    assert json.dumps(offline, sort_keys=True) == json.dumps(online, sort_keys=True)


def test_openapi_document_published(client):
    doc = client.get("/openapi.json").json()
    assert "/sessions/{session_id}/instruction" in doc["paths"]
    assert "/sessions/{session_id}/trace/{step}" in doc["paths"]
