"""Multi-step planning sessions: environment chaining, approval, persistence.

A session owns the current environment. Planning an instruction appends an
exchange; approving its final plan advances ``current_env`` to the
executor-verified post-operation environment, so the next query is built
from the most recent world state instead of the full conversation history.
Sessions persist as one directory each: ``session.json`` plus one
``step_NNN.json`` file per approved plan.
"""

from __future__ import annotations

import json
import os
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .actions import ActionSet, resolve_action_set
from .env import Environment, environment_from_data
from .errors import (
    CorruptStore,
    EnvMismatch,
    NotFound,
    NotLatestAttempt,
    PlanNotExecutable,
    TaskPlanError,
)
from .executor import GoalSpec, WorldState, execute_plan, verify_claimed_environment
from .llm import Backend, InferenceParams, complete
from .loop import (
    AttemptRecord,
    FeedbackMessage,
    LoopResult,
    error_to_data,
    exchange_turns,
    generate_feedback,
    run_planning_loop,
    validate_response,
)
from .plan import Plan, parse_plan, plan_to_data, serialize_plan
from .prompts import (
    DEFAULT_BUDGET,
    Conversation,
    PromptSet,
    Turn,
    build_conversation,
    estimate_tokens,
    resolve_prompt_set,
)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class Exchange:
    instruction: str
    query_text: str
    attempts: list[AttemptRecord]
    outcome: str
    approved_attempt: int | None = None

    def to_data(self) -> dict:
        return {
            "instruction": self.instruction,
            "query_text": self.query_text,
            "attempts": [a.to_data() for a in self.attempts],
            "outcome": self.outcome,
            "approved_attempt": self.approved_attempt,
        }

    @classmethod
    def from_data(cls, data: dict) -> "Exchange":
        return cls(
            instruction=data["instruction"],
            query_text=data["query_text"],
            attempts=[AttemptRecord.from_data(a) for a in data.get("attempts", [])],
            outcome=data.get("outcome", ""),
            approved_attempt=data.get("approved_attempt"),
        )


@dataclass
class Session:
    id: str
    action_set_ref: str
    prompt_set_ref: str
    initial_env: Environment
    current_env: Environment
    exchanges: list[Exchange] = field(default_factory=list)
    created_at: str = field(default_factory=_now)
    updated_at: str = field(default_factory=_now)
    action_set: ActionSet | None = field(default=None, repr=False, compare=False)
    prompt_set: PromptSet | None = field(default=None, repr=False, compare=False)

    def history_turns(self) -> list[tuple[Turn, ...]]:
        """Past exchanges as conversation turn groups, oldest first."""
        return [exchange_turns(e.query_text, e.attempts) for e in self.exchanges]

    def latest_plan(self) -> Plan | None:
        """Parsed plan of the latest attempt of the latest exchange."""
        if not self.exchanges:
            return None
        attempts = self.exchanges[-1].attempts
        if not attempts or attempts[-1].plan_data is None:
            return None
        return parse_plan(json.dumps(attempts[-1].plan_data), self.action_set, self.current_env)

    def approved_plans(self) -> list[Plan]:
        plans = []
        env = self.initial_env
        for exchange in self.exchanges:
            if exchange.approved_attempt is None:
                continue
            data = exchange.attempts[exchange.approved_attempt].plan_data
            plan = parse_plan(json.dumps(data), self.action_set, env)
            plans.append(plan)
            env = plan.environment_after
        return plans

    def to_data(self) -> dict:
        return {
            "id": self.id,
            "action_set": self.action_set_ref,
            "prompt_set": self.prompt_set_ref,
            "initial_environment": self.initial_env.to_data(),
            "current_environment": self.current_env.to_data(),
            "exchanges": [e.to_data() for e in self.exchanges],
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, Session):
            return NotImplemented
        return self.to_data() == other.to_data()


class SessionStore:
    """Filesystem session storage: one directory per session."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _dir(self, session_id: str) -> Path:
        return self.root / session_id

    def list_ids(self) -> list[str]:
        return sorted(p.name for p in self.root.iterdir() if (p / "session.json").is_file())

    # -- creation ----------------------------------------------------------

    def create_session(self, initial_env: Environment, action_set_ref: str, prompt_set_ref: str) -> Session:
        """Validate the refs, persist an empty session, and return it."""
        action_set = resolve_action_set(action_set_ref)
        prompt_set = resolve_prompt_set(prompt_set_ref)
        session = Session(
            id=uuid.uuid4().hex[:12],
            action_set_ref=action_set_ref,
            prompt_set_ref=prompt_set_ref,
            initial_env=initial_env,
            current_env=initial_env,
            action_set=action_set,
            prompt_set=prompt_set,
        )
        self.persist(session)
        return session

    # -- persistence -------------------------------------------------------

    def persist(self, session: Session) -> None:
        directory = self._dir(session.id)
        directory.mkdir(parents=True, exist_ok=True)
        session.updated_at = _now()
        with self._lock(session.id):
            tmp = directory / "session.json.tmp"
            tmp.write_text(json.dumps(session.to_data(), indent=2) + "\n")
            os.replace(tmp, directory / "session.json")

    def load(self, session_id: str) -> Session:
        path = self._dir(session_id) / "session.json"
        if not path.is_file():
            raise NotFound(session_id)
        try:
            data = json.loads(path.read_text())
            session = Session(
                id=data["id"],
                action_set_ref=data["action_set"],
                prompt_set_ref=data["prompt_set"],
                initial_env=environment_from_data(data["initial_environment"]),
                current_env=environment_from_data(data["current_environment"]),
                exchanges=[Exchange.from_data(e) for e in data.get("exchanges", [])],
                created_at=data["created_at"],
                updated_at=data["updated_at"],
            )
        except (KeyError, ValueError, TypeError, TaskPlanError) as exc:
            raise CorruptStore(str(path), str(exc)) from None
        session.action_set = resolve_action_set(session.action_set_ref)
        session.prompt_set = resolve_prompt_set(session.prompt_set_ref)
        return session

    def _lock(self, session_id: str, timeout: float = 2.0):
        store = self

        class _Lock:
            def __enter__(self):
                self.path = store._dir(session_id) / ".lock"
                deadline = time.monotonic() + timeout
                while True:
                    try:
                        self.fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
                        return self
                    except FileExistsError:
                        if time.monotonic() > deadline:
                            raise CorruptStore(str(self.path), "session is locked by another writer") from None
                        time.sleep(0.05)

            def __exit__(self, *exc):
                os.close(self.fd)
                self.path.unlink(missing_ok=True)

        return _Lock()

    # -- workflow ----------------------------------------------------------

    def run_instruction(
        self,
        session: Session,
        instruction: str,
        backend: Backend,
        params: InferenceParams,
        *,
        goal: GoalSpec | None = None,
        max_rounds: int = 5,
        budget: int = DEFAULT_BUDGET,
        system_first: bool = False,
        on_round=None,
    ) -> LoopResult:
        """Run the feedback loop for one instruction and record the exchange."""
        result = run_planning_loop(
            session.current_env,
            instruction,
            action_set=session.action_set,
            prompt_set=session.prompt_set,
            backend=backend,
            params=params,
            history=session.history_turns(),
            goal=goal,
            max_rounds=max_rounds,
            budget=budget,
            system_first=system_first,
            on_round=on_round,
        )
        session.exchanges.append(
            Exchange(
                instruction=instruction,
                query_text=result.query_text,
                attempts=list(result.transcript),
                outcome=result.outcome,
            )
        )
        self.persist(session)
        return result

    def run_human_feedback(
        self,
        session: Session,
        feedback_text: str,
        backend: Backend,
        params: InferenceParams,
        *,
        goal: GoalSpec | None = None,
        budget: int = DEFAULT_BUDGET,
        system_first: bool = False,
    ) -> LoopResult:
        """Send verbatim human feedback on the latest exchange and re-query once."""
        if not session.exchanges:
            raise NotLatestAttempt("there is no exchange to give feedback on")
        exchange = session.exchanges[-1]
        if exchange.approved_attempt is not None:
            raise NotLatestAttempt("latest exchange is already approved; give a new instruction instead")

        history = session.history_turns()[:-1]
        conv = build_conversation(
            session.prompt_set, history, session.current_env, exchange.instruction, budget
        )
        # swap the freshly built query for the recorded exchange, verbatim
        base = Conversation(conv.turns[:-1], conv.token_estimate - estimate_tokens(conv.turns[-1][1]))
        conv = base.with_turns(exchange_turns(exchange.query_text, exchange.attempts))
        message = FeedbackMessage("human", feedback_text)
        conv = conv.with_turns([("user", feedback_text)])

        text = complete(conv, params, backend, system_first)
        plan, errors, _trace = validate_response(text, session.action_set, session.current_env, goal)

        if exchange.attempts:
            last = exchange.attempts[-1]
            exchange.attempts[-1] = AttemptRecord(
                last.response_text, last.plan_data, last.errors, message, last.warnings
            )
        attempt = AttemptRecord(
            text,
            plan_to_data(plan) if plan is not None else None,
            tuple(error_to_data(e) for e in errors),
            None,
            plan.warnings if plan is not None else (),
        )
        exchange.attempts.append(attempt)

        if plan is not None and plan.is_clarification:
            outcome = "clarification_requested"
        elif not errors:
            outcome = "success"
        else:
            outcome = "exhausted"
        exchange.outcome = outcome
        self.persist(session)
        return LoopResult(outcome, 1, plan, tuple(exchange.attempts), exchange.query_text)

    def approve(self, session: Session, plan: Plan) -> Session:
        """Approve the latest attempt; advance the environment to the executor's truth."""
        if session.exchanges and session.exchanges[-1].approved_attempt is not None:
            raise NotLatestAttempt("latest exchange is already approved")
        latest = session.latest_plan()
        if latest is None or latest != plan:
            raise NotLatestAttempt()
        trace = execute_plan(WorldState.from_environment(session.current_env), plan, session.action_set)
        if trace.error is not None:
            raise PlanNotExecutable(trace.error.reason)
        diff = verify_claimed_environment(trace, plan.environment_after)
        if not diff.is_empty:
            raise EnvMismatch(diff.describe())

        exchange = session.exchanges[-1]
        exchange.approved_attempt = len(exchange.attempts) - 1
        session.current_env = trace.final.env

        step_number = sum(1 for e in session.exchanges if e.approved_attempt is not None)
        step_file = self._dir(session.id) / f"step_{step_number:03d}.json"
        step_file.write_text(serialize_plan(plan) + "\n")
        self.persist(session)
        return session

    def replay_approved(self, session: Session) -> Environment:
        """Re-verify environment chaining offline from the store alone."""
        env = session.initial_env
        for plan in session.approved_plans():
            trace = execute_plan(WorldState.from_environment(env), plan, session.action_set)
            if trace.error is not None:
                raise PlanNotExecutable(trace.error.reason)
            env = trace.final.env
        return env
