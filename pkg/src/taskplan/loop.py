"""Automatic feedback loop: validate each model reply, verbalize the first
problem as a corrective user message, and re-query until success or a cap.

Round counting follows the convention that a "round" is one feedback message
followed by one re-query, so a plan that is right the first time costs zero
rounds. Only the first error of an attempt is verbalized; batching several
issues into one message risks confusing the model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from .actions import ActionSet, ActionSpec
from .env import EnvDiff, Environment, StatePredicate, bare_name
from .errors import (
    LengthMismatch,
    MalformedJson,
    MissingKey,
    NoJsonFound,
    SchemaViolation,
    TaskPlanError,
    UnknownAction,
    UnknownObject,
    UnresolvedTarget,
)
from .executor import ExecutionTrace, GoalSpec, StepError, WorldState, check_goal, execute_plan
from .llm import Backend, InferenceParams, complete
from .plan import Plan, RuleViolation, check_structural_rules, parse_plan, plan_to_data
from .prompts import DEFAULT_BUDGET, PromptSet, Turn, build_conversation

DEFAULT_MAX_ROUNDS = 5


@dataclass(frozen=True)
class GoalUnmet:
    """The plan executed cleanly but the goal predicates do not hold."""

    unmet: tuple[tuple[str, StatePredicate, str], ...]

    def to_data(self) -> dict:
        return {"unmet": [[e, p.render(), kind] for e, p, kind in self.unmet]}


@dataclass(frozen=True)
class FeedbackMessage:
    source: str  # "auto" | "human"
    text: str
    trigger: dict | None = None  # structured error; required for auto messages

    def __post_init__(self):
        if self.source == "auto" and self.trigger is None:
            raise ValueError("auto feedback must carry its trigger")

    def to_data(self) -> dict:
        return {"source": self.source, "text": self.text, "trigger": self.trigger}


@dataclass(frozen=True)
class AttemptRecord:
    """One model reply plus what the checker made of it."""

    response_text: str
    plan_data: dict | None
    errors: tuple[dict, ...] = ()
    feedback: FeedbackMessage | None = None
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_data(self) -> dict:
        return {
            "response_text": self.response_text,
            "plan": self.plan_data,
            "errors": list(self.errors),
            "feedback": self.feedback.to_data() if self.feedback else None,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_data(cls, data: dict) -> "AttemptRecord":
        fb = data.get("feedback")
        return cls(
            response_text=data["response_text"],
            plan_data=data.get("plan"),
            errors=tuple(data.get("errors", [])),
            feedback=FeedbackMessage(fb["source"], fb["text"], fb.get("trigger")) if fb else None,
            warnings=tuple(data.get("warnings", [])),
        )


@dataclass(frozen=True)
class LoopResult:
    outcome: str  # "success" | "exhausted" | "clarification_requested"
    rounds_used: int
    final_plan: Plan | None
    transcript: tuple[AttemptRecord, ...]
    query_text: str = ""

    def to_data(self) -> dict:
        return {
            "outcome": self.outcome,
            "rounds_used": self.rounds_used,
            "final_plan": plan_to_data(self.final_plan) if self.final_plan else None,
            "transcript": [a.to_data() for a in self.transcript],
        }


# ---------------------------------------------------------------------------
# Error structuring
# ---------------------------------------------------------------------------


def error_to_data(error) -> dict:
    if isinstance(error, TaskPlanError):
        return error.as_dict()
    if isinstance(error, StepError):
        return {"code": "step_error", **error.to_data()}
    if isinstance(error, RuleViolation):
        return {
            "code": "rule_violation",
            "label": error.rule.label,
            "kind": error.rule.kind,
            "message": error.message,
            "step_index": error.step_index,
        }
    if isinstance(error, GoalUnmet):
        return {"code": "goal_unmet", **error.to_data()}
    if isinstance(error, EnvDiff):
        return {"code": "environment_mismatch", **error.to_data()}
    raise TypeError(f"not a loop error: {error!r}")


# ---------------------------------------------------------------------------
# Feedback generation
# ---------------------------------------------------------------------------


def _action_adding(action_set: ActionSet, predicate: str) -> ActionSpec | None:
    for spec in action_set.actions:
        for eff in spec.effects:
            if eff.op == "add" and eff.predicate == predicate:
                return spec
            if eff.op == "set_near" and predicate == "near_agent":
                return spec
    return None


def _action_detaching(action_set: ActionSet) -> ActionSpec | None:
    for spec in action_set.actions:
        ops = {e.op for e in spec.effects}
        adds = {e.predicate for e in spec.effects if e.op == "add"}
        if "clear_placement" in ops and "inside_hand" not in adds:
            return spec
    return None


def _step_error_text(err: StepError, action_set: ActionSet | None) -> str:
    prefix = f"Step {err.step_index + 1} failed: {err.action.pretty()}"
    failed = err.failed
    subject = failed.subject or "the object"

    def adder(predicate):
        if action_set is None:
            return None
        return _action_adding(action_set, predicate)

    if failed.check in ("open", "closed") and not failed.negate:
        fixer = adder(failed.check)
        text = f"{prefix} requires {subject} to be {failed.check}."
        if fixer:
            text += f" Add {fixer.name}({bare_name(subject)}) before this step."
        return text
    if failed.check in ("switched_on", "switched_off") and not failed.negate:
        fixer = adder(failed.check)
        text = f"{prefix} requires {subject} to be {failed.check.replace('_', ' ')}."
        if fixer:
            text += f" Add {fixer.name}({bare_name(subject)}) before this step."
        return text
    if failed.check == "openable":
        args = ", ".join(bare_name(a) for a in err.action.args)
        if failed.negate:
            alt = adder("inside_something")
            text = f"{prefix} cannot place anything on {subject}: {err.reason}."
            if alt:
                text += f" Use {alt.name}({args}) instead."
            return text
        alt = adder("on_something")
        text = f"{prefix} cannot place anything inside {subject}: {err.reason}."
        if alt:
            text += f" Use {alt.name}({args}) instead."
        return text
    if failed.check == "near":
        walker = adder("near_agent")
        target = failed.target or subject
        text = f"{prefix} requires the agent to be near {target}."
        if walker:
            text += f" Add {walker.name}({bare_name(target)}) before this step."
        return text
    if failed.check == "hand_empty":
        text = f"{prefix} requires the robot hand to be empty, but {err.reason}."
        return text + " Put the held object down before this step."
    if failed.check == "inside_hand" and not failed.negate:
        grabber = adder("inside_hand")
        text = f"{prefix} requires {subject} to be in the robot hand."
        if grabber:
            text += f" Add {grabber.name}({bare_name(subject)}) before this step."
        return text
    if failed.check == "inside_closed_container":
        container = failed.target
        text = f"{prefix} cannot reach {subject}: {err.reason}."
        opener = adder("open")
        if opener and container:
            text += f" Add {opener.name}({bare_name(container)}) before this step."
        return text
    if failed.check == "has_placement" and not failed.negate:
        attacher = adder("on_something")
        text = f"{prefix}: {err.reason}."
        if attacher:
            text += f" Add {attacher.name}() before this step."
        return text
    if failed.check == "has_placement" and failed.negate:
        detacher = _action_detaching(action_set) if action_set else None
        text = f"{prefix} is not allowed while {err.reason}."
        if detacher:
            text += f" Add {detacher.name}() before this step."
        return text
    if failed.check == "on_plane":
        attacher = adder("on_something")
        text = f"{prefix}: {err.reason}."
        if attacher:
            text += f" Add {attacher.name}() before this step."
        return text
    if failed.check == "is_object":
        return f"{prefix}: {err.reason}. Only objects defined in the input dictionary can be manipulated."
    return f"{prefix}: {err.reason}. Revise the plan."


def generate_feedback(error, action_set: ActionSet | None = None) -> FeedbackMessage | None:
    """Turn a structured error into one declarative correction message.

    Returns None only for an empty environment diff, which is not an error.
    """
    if isinstance(error, EnvDiff):
        if error.is_empty:
            return None
        text = (
            "Your environment_after does not match the result of executing the task_sequence: "
            + "; ".join(error.describe())
            + ". Update environment_after accordingly."
        )
        return FeedbackMessage("auto", text, error_to_data(error))

    trigger = error_to_data(error)

    if isinstance(error, StepError):
        return FeedbackMessage("auto", _step_error_text(error, action_set), trigger)
    if isinstance(error, UnknownAction):
        where = f"Step {error.step_index + 1} uses" if error.step_index is not None else "Your plan uses"
        text = f'{where} "{error.name}", which is not in the "ROBOT ACTION LIST".'
        if error.suggestion:
            text += f' Did you mean "{error.suggestion}"?'
        text += ' Use only the actions defined in the "ROBOT ACTION LIST".'
        return FeedbackMessage("auto", text, trigger)
    if isinstance(error, RuleViolation):
        label = error.rule.label or "a structural rule"
        return FeedbackMessage("auto", f"Your plan violates {label}: {error.message}. Revise the task_sequence.", trigger)
    if isinstance(error, GoalUnmet):
        parts = []
        for entity, pred, kind in error.unmet:
            if kind == "forbidden":
                parts.append(f"{entity} must not end up {pred.render()}")
            else:
                parts.append(f"{entity} should end up {pred.render()}")
        text = (
            "The plan executed without errors but did not accomplish the task: "
            + "; ".join(parts)
            + ". Revise the plan."
        )
        return FeedbackMessage("auto", text, trigger)
    if isinstance(error, (NoJsonFound, MalformedJson)):
        text = (
            "Your last reply did not contain a valid output dictionary. "
            "Reply with exactly one Python dictionary in the format defined earlier, and nothing else."
        )
        return FeedbackMessage("auto", text, trigger)
    if isinstance(error, MissingKey):
        return FeedbackMessage(
            "auto", f'Your output dictionary is missing the key "{error.key}". Follow the output format exactly.', trigger
        )
    if isinstance(error, LengthMismatch):
        text = (
            f'["task_sequence"] has {error.actions} elements but ["step_instructions"] has {error.instructions}. '
            "Each action must have exactly one explanation."
        )
        return FeedbackMessage("auto", text, trigger)
    if isinstance(error, UnknownObject):
        text = (
            f'"{error.name}" is not defined in the environment. '
            "Only objects defined in the input dictionary may be used."
        )
        return FeedbackMessage("auto", text, trigger)
    if isinstance(error, UnresolvedTarget):
        text = (
            f"Step {error.step_index + 1}: the destination of {error.action_name} cannot be determined. "
            f"Name it explicitly, for example {error.action_name}({bare_name(error.object_name)}, <destination>)."
        )
        return FeedbackMessage("auto", text, trigger)
    if isinstance(error, SchemaViolation):
        return FeedbackMessage(
            "auto", f"Your output is invalid at {error.path}: {error.reason}. Follow the output format exactly.", trigger
        )
    if isinstance(error, TaskPlanError):
        return FeedbackMessage("auto", f"{error.message}. Revise the plan.", trigger)
    raise TypeError(f"cannot generate feedback for {error!r}")


# ---------------------------------------------------------------------------
# Attempt validation
# ---------------------------------------------------------------------------


def validate_response(
    text: str,
    action_set: ActionSet,
    env: Environment,
    goal: GoalSpec | None = None,
) -> tuple[Plan | None, list, ExecutionTrace | None]:
    """Parse, rule-check, execute, and goal-check one assistant reply.

    Returns (plan, errors, trace); ``errors`` holds at most the first error
    found, in checking order: parse, structural rules, execution, goal.
    """
    try:
        plan = parse_plan(text, action_set, env)
    except TaskPlanError as exc:
        return None, [exc], None

    if plan.is_clarification:
        return plan, [], None

    violations = check_structural_rules(plan, action_set)
    if violations:
        return plan, [violations[0]], None

    trace = execute_plan(WorldState.from_environment(env), plan, action_set)
    if trace.error is not None:
        return plan, [trace.error], trace

    if goal is not None:
        met, unmet = check_goal(trace.final, goal)
        if not met:
            return plan, [GoalUnmet(tuple(unmet))], trace

    return plan, [], trace


# ---------------------------------------------------------------------------
# The loop
# ---------------------------------------------------------------------------


def run_planning_loop(
    env: Environment,
    instruction: str,
    *,
    action_set: ActionSet,
    prompt_set: PromptSet,
    backend: Backend,
    params: InferenceParams,
    history: Sequence[Sequence[Turn]] = (),
    goal: GoalSpec | None = None,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    budget: int = DEFAULT_BUDGET,
    system_first: bool = False,
    on_round: Callable[[int, str], None] | None = None,
) -> LoopResult:
    """Query, check, feed back, and re-query until success or the round cap."""
    if max_rounds < 0:
        raise ValueError("max_rounds must be >= 0")

    conv = build_conversation(prompt_set, history, env, instruction, budget)
    query_text = conv.turns[-1][1]
    rounds_used = 0
    attempts: list[AttemptRecord] = []

    while True:
        text = complete(conv, params, backend, system_first)
        plan, errors, _trace = validate_response(text, action_set, env, goal)
        plan_data = plan_to_data(plan) if plan is not None else None
        warnings = plan.warnings if plan is not None else ()

        if plan is not None and plan.is_clarification:
            attempts.append(AttemptRecord(text, plan_data, (), None, warnings))
            return LoopResult("clarification_requested", rounds_used, plan, tuple(attempts), query_text)

        if not errors:
            attempts.append(AttemptRecord(text, plan_data, (), None, warnings))
            return LoopResult("success", rounds_used, plan, tuple(attempts), query_text)

        error_dicts = tuple(error_to_data(e) for e in errors)
        if rounds_used >= max_rounds:
            attempts.append(AttemptRecord(text, plan_data, error_dicts, None, warnings))
            return LoopResult("exhausted", rounds_used, plan, tuple(attempts), query_text)

        feedback = generate_feedback(errors[0], action_set)
        rounds_used += 1
        attempts.append(AttemptRecord(text, plan_data, error_dicts, feedback, warnings))
        if on_round is not None:
            on_round(rounds_used, feedback.text)
        conv = conv.with_turns([("assistant", text), ("user", feedback.text)])


def exchange_turns(query_text: str, attempts: Sequence[AttemptRecord]) -> tuple[Turn, ...]:
    """Reconstruct the conversation turns of one exchange for history reuse."""
    turns: list[Turn] = [("user", query_text)]
    for attempt in attempts:
        turns.append(("assistant", attempt.response_text))
        if attempt.feedback is not None:
            turns.append(("user", attempt.feedback.text))
    return tuple(turns)
