"""Error hierarchy shared across the package.

Every error carries a stable machine ``code`` and a ``detail`` mapping so
the HTTP layer and the feedback generator can act on structure rather than
on message text.
"""

from __future__ import annotations

from typing import Any


class TaskPlanError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"
    http_status = 400

    def __init__(self, message: str, **detail: Any):
        super().__init__(message)
        self.message = message
        self.detail = detail

    def as_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "detail": self.detail}


# ---------------------------------------------------------------------------
# Parsing / schema errors
# ---------------------------------------------------------------------------


class MalformedJson(TaskPlanError):
    """Input contained a candidate document that could not be decoded."""

    code = "malformed_json"
    http_status = 422


class NoJsonFound(TaskPlanError):
    """Assistant text contained no dictionary at all."""

    code = "no_json_found"
    http_status = 422


class SchemaViolation(TaskPlanError):
    """A document decoded fine but violates the schema at ``path``."""

    code = "schema_violation"
    http_status = 422

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}", path=path, reason=reason)
        self.path = path
        self.reason = reason


class MissingKey(TaskPlanError):
    code = "missing_key"
    http_status = 422

    def __init__(self, key: str):
        super().__init__(f'missing required key "{key}"', key=key)
        self.key = key


class UnknownAction(TaskPlanError):
    """An action name not present in the active action set.

    ``suggestion`` holds the nearest registered name by edit distance, or
    None when nothing is close enough to be worth suggesting.
    """

    code = "unknown_action"
    http_status = 422

    def __init__(self, name: str, suggestion: str | None = None, step_index: int | None = None):
        msg = f'unknown action "{name}"'
        if suggestion:
            msg += f' (did you mean "{suggestion}"?)'
        super().__init__(msg, name=name, suggestion=suggestion, step_index=step_index)
        self.name = name
        self.suggestion = suggestion
        self.step_index = step_index


class LengthMismatch(TaskPlanError):
    code = "length_mismatch"
    http_status = 422

    def __init__(self, actions: int, instructions: int):
        super().__init__(
            f"task_sequence has {actions} elements but step_instructions has {instructions}",
            actions=actions,
            instructions=instructions,
        )
        self.actions = actions
        self.instructions = instructions


class UnknownObject(TaskPlanError):
    code = "unknown_object"
    http_status = 422

    def __init__(self, name: str, step_index: int | None = None):
        super().__init__(f'"{name}" does not name an entity of the environment', name=name, step_index=step_index)
        self.name = name
        self.step_index = step_index


class UnresolvedTarget(TaskPlanError):
    """A placement action whose destination cannot be inferred."""

    code = "unresolved_target"
    http_status = 422

    def __init__(self, step_index: int, action_name: str, object_name: str):
        super().__init__(
            f"step {step_index + 1}: cannot infer the destination of {action_name} for {object_name}",
            step_index=step_index,
            action_name=action_name,
            object_name=object_name,
        )
        self.step_index = step_index
        self.action_name = action_name
        self.object_name = object_name


# ---------------------------------------------------------------------------
# Prompt / conversation errors
# ---------------------------------------------------------------------------


class MissingFile(TaskPlanError):
    code = "missing_file"
    http_status = 422

    def __init__(self, name: str):
        super().__init__(f"prompt file missing: {name}", name=name)
        self.name = name


class PlaceholderError(TaskPlanError):
    code = "placeholder_error"
    http_status = 422

    def __init__(self, template: str, which: str, count: int):
        super().__init__(
            f"{template}: placeholder {which} must appear exactly once (found {count})",
            template=template,
            which=which,
            count=count,
        )
        self.which = which
        self.count = count


class BudgetTooSmall(TaskPlanError):
    code = "budget_too_small"
    http_status = 422

    def __init__(self, needed: int, budget: int):
        super().__init__(
            f"fixed prompts and the current query need {needed} tokens but the budget is {budget}",
            needed=needed,
            budget=budget,
        )
        self.needed = needed
        self.budget = budget


# ---------------------------------------------------------------------------
# Backend errors
# ---------------------------------------------------------------------------


class Transport(TaskPlanError):
    """HTTP-level failure from the model provider, surfaced verbatim."""

    code = "llm_transport"
    http_status = 502

    def __init__(self, status: int, body: str):
        super().__init__(f"provider returned status {status}", status=status, body=body)
        self.status = status
        self.body = body


class Timeout(TaskPlanError):
    code = "llm_timeout"
    http_status = 504

    def __init__(self, seconds: float):
        super().__init__(f"no response within {seconds:g} s", seconds=seconds)
        self.seconds = seconds


class ScriptExhausted(TaskPlanError):
    code = "script_exhausted"
    http_status = 502

    def __init__(self, turn: int):
        super().__init__(f"scripted backend has no response for turn {turn}", turn=turn)
        self.turn = turn


# ---------------------------------------------------------------------------
# Session store errors
# ---------------------------------------------------------------------------


class NotFound(TaskPlanError):
    code = "session_not_found"
    http_status = 404

    def __init__(self, session_id: str):
        super().__init__(f"no session {session_id}", session_id=session_id)
        self.session_id = session_id


class CorruptStore(TaskPlanError):
    code = "corrupt_store"
    http_status = 500

    def __init__(self, path: str, reason: str = ""):
        super().__init__(f"cannot read {path}" + (f": {reason}" if reason else ""), path=path, reason=reason)
        self.path = path


class NotLatestAttempt(TaskPlanError):
    code = "stale_attempt"
    http_status = 409

    def __init__(self, message: str = "only the latest attempt of the latest exchange may be approved"):
        super().__init__(message)


class PlanNotExecutable(TaskPlanError):
    code = "plan_not_executable"
    http_status = 409

    def __init__(self, reason: str):
        super().__init__(f"plan does not execute: {reason}", reason=reason)


class EnvMismatch(TaskPlanError):
    """Claimed post-operation environment disagrees with the executor."""

    code = "environment_mismatch"
    http_status = 409

    def __init__(self, diff_summary: list[str]):
        super().__init__(
            "claimed environment_after disagrees with the executed result",
            diff=diff_summary,
        )
        self.diff_summary = diff_summary


# ---------------------------------------------------------------------------
# Benchmark errors
# ---------------------------------------------------------------------------


class ReferenceSequenceInvalid(TaskPlanError):
    """A scenario file whose own reference sequence does not pass the executor."""

    code = "reference_sequence_invalid"
    http_status = 422

    def __init__(self, scenario_id: str, reason: str):
        super().__init__(f"scenario {scenario_id}: reference sequence invalid: {reason}", scenario_id=scenario_id, reason=reason)
        self.scenario_id = scenario_id
        self.reason = reason
