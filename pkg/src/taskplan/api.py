"""HTTP facade over sessions, planning, feedback, approval, and traces.

A thin veneer: every response body is derivable from the session store plus
executor outputs. Planning requests run the feedback loop synchronously;
clients poll ``GET /sessions/{id}/status`` for round-by-round progress.
"""

from __future__ import annotations

import json
import threading
from typing import Any

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .env import diff_environments, environment_from_data
from .errors import NotFound, NotLatestAttempt, TaskPlanError
from .executor import WorldState, execute_plan, trace_records
from .llm import Backend, InferenceParams
from .loop import LoopResult
from .plan import parse_plan
from .prompts import DEFAULT_BUDGET
from .sessions import Session, SessionStore


class CreateSessionRequest(BaseModel):
    environment: dict
    action_set: str = "lfo"
    prompt_set: str = ""  # defaults to the action set's bundled prompts


class ParamsModel(BaseModel):
    model_name: str = "gpt-3.5-turbo"
    temperature: float = 0.0
    max_response_tokens: int = 1024
    seed: int | None = None


class InstructionRequest(BaseModel):
    text: str
    max_rounds: int = 5
    params: ParamsModel = Field(default_factory=ParamsModel)


class FeedbackRequest(BaseModel):
    text: str
    params: ParamsModel = Field(default_factory=ParamsModel)


class AttemptRef(BaseModel):
    exchange: int
    attempt: int


class ApproveRequest(BaseModel):
    attempt_ref: AttemptRef


def _attempt_summary(attempt) -> dict:
    data = attempt.to_data()
    plan = data.get("plan")
    if plan and plan.get("environment_before") and plan.get("environment_after"):
        before = environment_from_data(plan["environment_before"])
        after = environment_from_data(plan["environment_after"])
        data["env_diff"] = diff_environments(before, after).to_data()
    else:
        data["env_diff"] = None
    return data


def session_summary(session: Session) -> dict:
    return {
        "id": session.id,
        "action_set": session.action_set_ref,
        "prompt_set": session.prompt_set_ref,
        "created_at": session.created_at,
        "updated_at": session.updated_at,
        "initial_environment": session.initial_env.to_data(),
        "current_environment": session.current_env.to_data(),
        "exchanges": [
            {
                "index": i,
                "instruction": e.instruction,
                "outcome": e.outcome,
                "approved_attempt": e.approved_attempt,
                "attempts": [_attempt_summary(a) for a in e.attempts],
            }
            for i, e in enumerate(session.exchanges)
        ],
    }


def _loop_result_body(result: LoopResult) -> dict:
    return result.to_data()


def create_app(
    sessions_dir: str,
    backend: Backend,
    default_params: InferenceParams | None = None,
    budget: int = DEFAULT_BUDGET,
    cors_origins: tuple[str, ...] = ("*",),
) -> FastAPI:
    store = SessionStore(sessions_dir)
    app = FastAPI(title="taskplan service", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=list(cors_origins), allow_methods=["*"], allow_headers=["*"]
    )

    progress: dict[str, dict[str, Any]] = {}
    progress_lock = threading.Lock()

    def set_progress(session_id: str, **fields):
        with progress_lock:
            entry = progress.setdefault(session_id, {"running": False, "round": 0, "last_feedback": None})
            entry.update(fields)

    @app.exception_handler(TaskPlanError)
    async def taskplan_error_handler(request: Request, exc: TaskPlanError):
        return JSONResponse(status_code=exc.http_status, content=exc.as_dict())

    def params_from(model: ParamsModel) -> InferenceParams:
        if default_params is not None and model == ParamsModel():
            return default_params
        return InferenceParams(
            model_name=model.model_name,
            temperature=model.temperature,
            max_response_tokens=model.max_response_tokens,
            seed=model.seed,
        )

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionRequest):
        env = environment_from_data(body.environment)
        prompt_ref = body.prompt_set or body.action_set
        session = store.create_session(env, body.action_set, prompt_ref)
        return {"session_id": session.id}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return session_summary(store.load(session_id))

    @app.get("/sessions/{session_id}/status")
    def get_status(session_id: str):
        store.load(session_id)  # 404 for unknown ids
        with progress_lock:
            return dict(progress.get(session_id, {"running": False, "round": 0, "last_feedback": None}))

    @app.post("/sessions/{session_id}/instruction")
    def post_instruction(session_id: str, body: InstructionRequest):
        session = store.load(session_id)
        set_progress(session_id, running=True, round=0, last_feedback=None)
        try:
            result = store.run_instruction(
                session,
                body.text,
                backend,
                params_from(body.params),
                max_rounds=body.max_rounds,
                budget=budget,
                on_round=lambda n, text: set_progress(session_id, round=n, last_feedback=text),
            )
        finally:
            set_progress(session_id, running=False)
        return _loop_result_body(result)

    @app.post("/sessions/{session_id}/feedback")
    def post_feedback(session_id: str, body: FeedbackRequest):
        session = store.load(session_id)
        result = store.run_human_feedback(session, body.text, backend, params_from(body.params), budget=budget)
        return _loop_result_body(result)

    @app.post("/sessions/{session_id}/approve")
    def post_approve(session_id: str, body: ApproveRequest):
        session = store.load(session_id)
        ref = body.attempt_ref
        if ref.exchange != len(session.exchanges) - 1:
            raise NotLatestAttempt()
        if not session.exchanges or ref.attempt != len(session.exchanges[-1].attempts) - 1:
            raise NotLatestAttempt()
        plan = session.latest_plan()
        if plan is None:
            raise NotLatestAttempt("latest attempt holds no parseable plan")
        store.approve(session, plan)
        return session_summary(session)

    @app.get("/sessions/{session_id}/trace/{step}")
    def get_trace(session_id: str, step: int):
        session = store.load(session_id)
        plans = session.approved_plans()
        if not 1 <= step <= len(plans):
            raise NotFound(f"{session_id}/trace/{step}")
        env = session.initial_env
        for plan in plans[: step - 1]:
            env = execute_plan(WorldState.from_environment(env), plan, session.action_set).final.env
        trace = execute_plan(WorldState.from_environment(env), plans[step - 1], session.action_set)
        return {"step": step, "records": trace_records(trace)}

    return app
