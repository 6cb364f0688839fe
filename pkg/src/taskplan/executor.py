"""Symbolic step-by-step execution of plans against a world state.

Each action's preconditions are evaluated in declared order; the first
failure stops execution with a structured :class:`StepError`. When all
preconditions hold, the effects are applied atomically, producing a new
immutable :class:`WorldState`. There is no physics here, only the state
predicates: the executor answers "is every step applicable" and "what does
the world look like afterwards", which stands in for a full simulator's
executability check.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .actions import ActionSet, ActionSpec, Condition, Effect
from .env import (
    EnvDiff,
    Environment,
    StatePredicate,
    bare_name,
    diff_environments,
)
from .errors import SchemaViolation
from .plan import ActionInstance, Plan


@dataclass(frozen=True)
class WorldState:
    """An environment plus derived agent facts, kept in lockstep.

    ``hand`` mirrors the entity carrying ``inside_hand()``; ``agent_near``
    mirrors the entity carrying ``near_agent()``. At most one of each may
    exist (single arm, single agent).
    """

    env: Environment
    hand: str | None = None
    agent_near: str | None = None

    @classmethod
    def from_environment(cls, env: Environment) -> "WorldState":
        held = [e for e in env.entities if env.has_state(e, "inside_hand")]
        if len(held) > 1:
            raise SchemaViolation("environment", f"more than one entity inside_hand: {held}")
        near = [e for e in env.entities if env.has_state(e, "near_agent")]
        if len(near) > 1:
            raise SchemaViolation("environment", f"more than one entity near_agent: {near}")
        return cls(env, held[0] if held else None, near[0] if near else None)

    def digest(self) -> str:
        blob = json.dumps(
            {"env": self.env.canonical_data(), "hand": self.hand, "near": self.agent_near},
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class FailedCondition:
    """Structured account of the first precondition that did not hold."""

    check: str
    subject: str | None = None
    target: str | None = None
    negate: bool = False


@dataclass(frozen=True)
class StepError:
    """Why a step is not executable; ``reason`` names entity and predicate."""

    step_index: int
    action: ActionInstance
    failed: FailedCondition
    reason: str

    def to_data(self) -> dict:
        return {
            "step_index": self.step_index,
            "action": self.action.pretty(),
            "failed": {
                "check": self.failed.check,
                "subject": self.failed.subject,
                "target": self.failed.target,
                "negate": self.failed.negate,
            },
            "reason": self.reason,
        }


@dataclass(frozen=True)
class ExecutionTrace:
    start: WorldState
    steps: tuple[tuple[ActionInstance, WorldState], ...]
    error: StepError | None
    final: WorldState

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class GoalSpec:
    """Checkable stand-in for goal correctness: required and forbidden predicates."""

    required: tuple[tuple[str, StatePredicate], ...] = ()
    forbidden: tuple[tuple[str, StatePredicate], ...] = ()

    @classmethod
    def from_data(cls, data: dict, path: str = "goal") -> "GoalSpec":
        def parse_side(key):
            out = []
            for i, item in enumerate(data.get(key, [])):
                if not (isinstance(item, list) and len(item) == 2):
                    raise SchemaViolation(f"{path}.{key}[{i}]", "expected [entity, state]")
                entity, state = item
                out.append((entity, StatePredicate.parse(state, f"{path}.{key}[{i}]")))
            return tuple(out)

        return cls(parse_side("required"), parse_side("forbidden"))

    def to_data(self) -> dict:
        return {
            "required": [[e, p.render()] for e, p in self.required],
            "forbidden": [[e, p.render()] for e, p in self.forbidden],
        }


# ---------------------------------------------------------------------------
# Condition evaluation
# ---------------------------------------------------------------------------


def _resolve_ref(ref: str | None, act: ActionInstance, links: dict[str, str]) -> tuple[str | None, str | None]:
    """Resolve param:/link:/literal references; returns (entity, error)."""
    if ref is None or ref in ("hand", "agent"):
        return None, None
    if ref.startswith("param:"):
        idx = int(ref.split(":")[1])
        if idx >= len(act.args):
            return None, f"{act.pretty()} is missing argument {idx + 1}"
        return act.args[idx], None
    if ref.startswith("link:"):
        idx = int(ref.split(":")[1])
        if idx >= len(act.args):
            return None, f"{act.pretty()} is missing argument {idx + 1}"
        entity = act.args[idx]
        linked = links.get(entity)
        if linked is None:
            return None, f"no container is linked to {entity}"
        return linked, None
    return ref, None


def _near(state: WorldState, entity: str) -> bool:
    """Near with one hop: standing by a table counts as near what sits on it."""
    if state.agent_near == entity:
        return True
    placement = state.env.placement_of(entity)
    return placement is not None and placement.target == state.agent_near


def _check_holds(
    check: str, subject: str | None, target: str | None, state: WorldState
) -> tuple[bool, str, str | None]:
    """Return (holds, reason, aux-entity).

    ``reason`` describes the failing side of whichever polarity fails; the
    aux entity names a third party involved (e.g. the closed container).
    """
    env = state.env
    if check == "hand_empty":
        if state.hand is None:
            return True, "", None
        return False, f"the robot hand already holds {state.hand}", state.hand
    if check == "inside_hand":
        if state.hand == subject:
            return True, "", None
        return False, f"{subject} is not in the robot hand", None
    if check == "near":
        if target and _near(state, target):
            return True, "", None
        return False, f"the agent is not near {target}", None
    if check == "has_placement":
        placement = env.placement_of(subject)
        if placement is not None:
            return True, f"{subject} is constrained by {placement.target}", placement.target
        return False, f"{subject} is not resting on or inside anything", None
    if check == "on_plane":
        if any(p.kind == "on_something" for p in env.states_of(subject)):
            return True, "", None
        return False, f"{subject} is not on a plane", None
    if check == "inside_closed_container":
        for p in env.states_of(subject):
            if p.kind == "inside_something" and p.target and env.has_state(p.target, "closed"):
                return True, f"{subject} is inside closed {p.target}", p.target
        return False, "", None
    if check == "openable":
        if env.has_state(subject, "open") or env.has_state(subject, "closed"):
            return True, "", None
        return False, f"{subject} is not a container with a door", None
    if check in ("open", "closed", "switched_on", "switched_off"):
        if env.has_state(subject, check):
            return True, "", None
        return False, f"{subject} is not {check.replace('_', ' ')}", None
    if check == "is_object":
        if env.is_object(subject):
            return True, "", None
        return False, f"{subject} is not a manipulable object", None
    raise SchemaViolation("condition", f"unknown check {check!r}")


def _negated_reason(check: str, subject: str | None, target: str | None, positive_reason: str) -> str:
    """Reason text when a must-not-hold condition holds."""
    if check in ("inside_closed_container", "has_placement"):
        return positive_reason  # already descriptive, e.g. "x is inside closed y"
    if check == "openable":
        return f"{subject} is a container with a door, not a flat surface"
    if check == "hand_empty":
        return "the robot hand is empty"
    if check == "inside_hand":
        return f"{subject} is already in the robot hand"
    return f"condition {check} must not hold for {subject}"


def evaluate_condition(
    cond: Condition, act: ActionInstance, state: WorldState, links: dict[str, str]
) -> tuple[bool, FailedCondition | None, str]:
    subject, err = _resolve_ref(cond.subject, act, links)
    if err:
        return False, FailedCondition(cond.check, subject, None, cond.negate), err
    target, err = _resolve_ref(cond.target, act, links)
    if err:
        return False, FailedCondition(cond.check, subject, target, cond.negate), err

    holds, reason, aux = _check_holds(cond.check, subject, target, state)
    if cond.negate:
        if not holds:
            return True, None, ""
        return (
            False,
            FailedCondition(cond.check, subject, target or aux, True),
            _negated_reason(cond.check, subject, target, reason),
        )
    if holds:
        return True, None, ""
    return False, FailedCondition(cond.check, subject, target, False), reason


# ---------------------------------------------------------------------------
# Effect application
# ---------------------------------------------------------------------------

_CONFLICTS = {
    "open": ("closed",),
    "closed": ("open",),
    "switched_on": ("switched_off",),
    "switched_off": ("switched_on",),
    "on_something": ("on_something", "inside_something"),
    "inside_something": ("on_something", "inside_something"),
}


def _apply_effects(
    spec: ActionSpec, act: ActionInstance, state: WorldState, links: dict[str, str]
) -> WorldState | str:
    """Apply all effects; returns the new state or an error reason string."""
    env = state.env
    hand = state.hand
    near = state.agent_near

    def add(entity: str, pred: StatePredicate):
        nonlocal env, hand
        kept = tuple(p for p in env.states_of(entity) if p.kind not in _CONFLICTS.get(pred.kind, ()))
        env = env.replace_states(entity, kept + (pred,))
        if pred.kind == "inside_hand":
            hand = entity

    def remove(entity: str, kind: str):
        nonlocal env, hand
        env = env.replace_states(entity, tuple(p for p in env.states_of(entity) if p.kind != kind))
        if kind == "inside_hand" and hand == entity:
            hand = None

    for eff in spec.effects:
        subject, err = _resolve_ref(eff.subject, act, links)
        if err:
            return err
        if eff.op == "set_near":
            for e in env.entities:
                if env.has_state(e, "near_agent"):
                    remove(e, "near_agent")
            add(subject, StatePredicate("near_agent"))
            near = subject
            continue
        if eff.op == "clear_placement":
            for p in list(env.states_of(subject)):
                if p.is_placement:
                    remove(subject, p.kind)
            continue
        if eff.op == "add":
            if eff.predicate == "inside_hand" and hand is not None and hand != subject:
                return f"the robot hand already holds {hand}"
            target, err = _resolve_ref(eff.target, act, links)
            if err:
                return err
            add(subject, StatePredicate(eff.predicate, target))
            continue
        if eff.op == "remove":
            remove(subject, eff.predicate)
            continue
        return f"unknown effect op {eff.op!r}"

    return WorldState(env, hand, near)


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def execute_step(
    state: WorldState, act: ActionInstance, action_set: ActionSet, step_index: int = 0
) -> WorldState | StepError:
    """One step: all preconditions, then atomic effects."""
    spec = action_set.by_name.get(act.name)
    if spec is None:
        return StepError(
            step_index,
            act,
            FailedCondition("known_action", act.name),
            f"{act.name} is not in the action list",
        )
    if len(act.args) != spec.arity:
        return StepError(
            step_index,
            act,
            FailedCondition("arity", act.name),
            f"{act.pretty()} takes {spec.arity} argument(s), got {len(act.args)}",
        )
    for arg in act.args:
        if arg not in state.env.entities:
            return StepError(
                step_index,
                act,
                FailedCondition("known_entity", arg),
                f"{arg} is not an entity of the environment",
            )

    for cond in spec.preconditions:
        ok, failed, reason = evaluate_condition(cond, act, state, action_set.links)
        if not ok:
            return StepError(step_index, act, failed, reason)

    result = _apply_effects(spec, act, state, action_set.links)
    if isinstance(result, str):
        return StepError(step_index, act, FailedCondition("effect", act.name), result)
    return result


def execute_plan(start: WorldState, plan: Plan, action_set: ActionSet) -> ExecutionTrace:
    """Run all steps until completion or the first error; deterministic."""
    state = start
    steps: list[tuple[ActionInstance, WorldState]] = []
    for i, act in enumerate(plan.task_sequence):
        result = execute_step(state, act, action_set, i)
        if isinstance(result, StepError):
            return ExecutionTrace(start, tuple(steps), result, state)
        steps.append((act, result))
        state = result
    return ExecutionTrace(start, tuple(steps), None, state)


def execute_sequence(start: WorldState, sequence, action_set: ActionSet) -> ExecutionTrace:
    """Like :func:`execute_plan` for a bare list of :class:`ActionInstance`."""
    state = start
    steps: list[tuple[ActionInstance, WorldState]] = []
    for i, act in enumerate(sequence):
        result = execute_step(state, act, action_set, i)
        if isinstance(result, StepError):
            return ExecutionTrace(start, tuple(steps), result, state)
        steps.append((act, result))
        state = result
    return ExecutionTrace(start, tuple(steps), None, state)


# ---------------------------------------------------------------------------
# Goal checking and claim verification
# ---------------------------------------------------------------------------


def check_goal(final: WorldState, goal: GoalSpec) -> tuple[bool, list[tuple[str, StatePredicate, str]]]:
    """``met`` iff every required predicate holds and no forbidden one does."""
    unmet: list[tuple[str, StatePredicate, str]] = []
    for entity, pred in goal.required:
        if pred not in final.env.states_of(entity):
            unmet.append((entity, pred, "missing"))
    for entity, pred in goal.forbidden:
        if pred in final.env.states_of(entity):
            unmet.append((entity, pred, "forbidden"))
    return (not unmet), unmet


def verify_claimed_environment(trace: ExecutionTrace, claimed: Environment) -> EnvDiff:
    """Diff the executor's final environment against the model's claim.

    An empty diff means the model estimated the post-operation environment
    accurately. Only meaningful for error-free traces.
    """
    if trace.error is not None:
        raise ValueError("trace ended in an error; there is no final environment to verify")
    return diff_environments(trace.final.env, claimed)


# ---------------------------------------------------------------------------
# Trace export
# ---------------------------------------------------------------------------


def trace_records(trace: ExecutionTrace) -> list[dict]:
    records = []
    for i, (act, state) in enumerate(trace.steps):
        records.append(
            {
                "index": i,
                "action": act.name,
                "args": [bare_name(a) for a in act.args],
                "ok": True,
                "state_digest": state.digest(),
            }
        )
    if trace.error is not None:
        err = trace.error
        records.append(
            {
                "index": err.step_index,
                "action": err.action.name,
                "args": [bare_name(a) for a in err.action.args],
                "ok": False,
                "state_digest": trace.final.digest(),
                "error": err.to_data(),
            }
        )
    return records


def trace_to_jsonl(trace: ExecutionTrace) -> str:
    """One JSON record per step, for regression diffing."""
    return "\n".join(json.dumps(r, sort_keys=True) for r in trace_records(trace))
