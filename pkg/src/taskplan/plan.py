"""Strict parsing and validation of the model's five-key output dictionary.

The assistant is asked for a dictionary with keys ``task_cohesion``
(holding ``task_sequence``, ``step_instructions`` and ``object_name``),
``environment_before``, ``environment_after``, ``instruction_summary`` and
``question``. Extraction tolerates surrounding prose, Markdown fences and
Python-literal dictionaries; validation is strict and never repairs a
violating value.

Action calls come in two surface forms, both accepted: parameterized
(``Put(breadslice, plate)``) and nullary with a separate ``object_name``
(``grasp_object()``). Nullary calls are normalized by filling the implicit
object, and a placement action without an explicit destination takes it
from the claimed ``environment_after``.
"""

from __future__ import annotations

import ast
import json
import re
from dataclasses import dataclass, field

from .actions import ActionSet, ActionSpec, PlanRule, suggest_action
from .env import (
    Environment,
    bare_name,
    diff_environments,
    environment_from_data,
    normalize_entity,
    resolve_entity,
)
from .errors import (
    LengthMismatch,
    MalformedJson,
    MissingKey,
    NoJsonFound,
    SchemaViolation,
    UnknownAction,
    UnknownObject,
    UnresolvedTarget,
)

ACTION_CALL_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*$")


@dataclass(frozen=True)
class ActionInstance:
    """One step of a task sequence with fully resolved arguments."""

    name: str
    args: tuple[str, ...] = ()
    surface: str = field(default="", compare=False)

    def render(self) -> str:
        if self.surface:
            return self.surface
        return f"{self.name}({', '.join(bare_name(a) for a in self.args)})"

    def pretty(self) -> str:
        """Canonical rendering used in messages: name(bare, args)."""
        return f"{self.name}({', '.join(bare_name(a) for a in self.args)})"


@dataclass(frozen=True)
class RuleViolation:
    """One breached structural rule; violations are values, not exceptions."""

    rule: PlanRule
    message: str
    step_index: int | None = None


@dataclass(eq=False)
class Plan:
    """Validated form of one assistant output."""

    task_sequence: tuple[ActionInstance, ...]
    step_instructions: tuple[str, ...]
    object_name: str | tuple[str, ...]
    environment_before: Environment
    environment_after: Environment
    instruction_summary: str
    question: str = ""
    warnings: tuple[str, ...] = field(default=(), compare=False)

    @property
    def is_clarification(self) -> bool:
        return bool(self.question.strip())

    def object_names(self) -> tuple[str, ...]:
        return (self.object_name,) if isinstance(self.object_name, str) else self.object_name

    def __eq__(self, other) -> bool:
        if not isinstance(other, Plan):
            return NotImplemented
        return (
            self.task_sequence == other.task_sequence
            and self.step_instructions == other.step_instructions
            and self.object_name == other.object_name
            and self.environment_before == other.environment_before
            and self.environment_after == other.environment_after
            and self.instruction_summary == other.instruction_summary
            and self.question == other.question
        )


# ---------------------------------------------------------------------------
# Dictionary extraction
# ---------------------------------------------------------------------------


def _balanced_spans(text: str):
    """Yield (start, end) spans of brace-balanced candidates, longest first per start."""
    decoder = json.JSONDecoder()
    for start, ch in enumerate(text):
        if ch != "{":
            continue
        try:
            _, end = decoder.raw_decode(text[start:])
            yield start, start + end, "json"
            continue
        except json.JSONDecodeError:
            pass
        depth = 0
        in_str: str | None = None
        for i in range(start, len(text)):
            c = text[i]
            if in_str:
                if c == "\\":
                    continue
                if c == in_str:
                    in_str = None
            elif c in "'\"":
                in_str = c
            elif c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth == 0:
                    yield start, i + 1, "literal"
                    break


def extract_dict(text: str) -> dict:
    """Pull the first dictionary out of raw assistant text.

    Code fences and prose are tolerated. JSON is tried first, then Python
    literal syntax (the prompt asks for a "Python dictionary").
    """
    saw_candidate = False
    for start, end, kind in _balanced_spans(text):
        saw_candidate = True
        chunk = text[start:end]
        if kind == "json":
            try:
                data = json.loads(chunk)
            except json.JSONDecodeError:
                continue
        else:
            try:
                data = ast.literal_eval(chunk)
            except (ValueError, SyntaxError):
                continue
        if isinstance(data, dict):
            return data
    if saw_candidate:
        raise MalformedJson("found a dictionary-like block but could not decode it")
    raise NoJsonFound("no dictionary found in the reply")


# ---------------------------------------------------------------------------
# Action call parsing
# ---------------------------------------------------------------------------


def parse_action_call(text: str, step_index: int, action_set: ActionSet) -> tuple[ActionSpec, list[str], str]:
    """Split ``Name(arg, ...)`` into a spec and raw argument tokens."""
    if not isinstance(text, str):
        raise SchemaViolation(f"task_sequence[{step_index}]", "action must be a string")
    m = ACTION_CALL_RE.match(text.strip())
    if not m:
        raise SchemaViolation(f"task_sequence[{step_index}]", f"cannot parse action call {text!r}")
    name, raw_args = m.group(1), m.group(2)
    spec = action_set.by_name.get(name)
    if spec is None:
        raise UnknownAction(name, suggestion=suggest_action(action_set, name), step_index=step_index)
    tokens = []
    if raw_args and raw_args.strip():
        for tok in raw_args.split(","):
            try:
                tokens.append(normalize_entity(tok))
            except ValueError:
                raise SchemaViolation(
                    f"task_sequence[{step_index}]", f"bad argument {tok.strip()!r} in {text!r}"
                ) from None
    return spec, tokens, text.strip()


def _fill_implicit_args(
    spec: ActionSpec, tokens: list[str], implicit_object: str | None, step_index: int
) -> tuple[list[str], bool]:
    """Complete a nullary/short call; returns (args, needs_target_resolution)."""
    if len(tokens) > spec.arity:
        raise SchemaViolation(
            f"task_sequence[{step_index}]", f"{spec.name} takes {spec.arity} argument(s), got {len(tokens)}"
        )
    if len(tokens) == spec.arity:
        return tokens, False
    if not spec.implicit_object or implicit_object is None:
        raise SchemaViolation(
            f"task_sequence[{step_index}]", f"{spec.name} takes {spec.arity} argument(s), got {len(tokens)}"
        )
    if spec.arity == 1 and not tokens:
        return [implicit_object], False
    if spec.arity == 2:
        if not tokens:
            return [implicit_object], True  # destination resolved from environment_after
        if tokens == [implicit_object]:
            return [implicit_object], True
        return [implicit_object, tokens[0]], False
    raise SchemaViolation(f"task_sequence[{step_index}]", f"cannot complete arguments for {spec.name}")


# ---------------------------------------------------------------------------
# Plan parsing
# ---------------------------------------------------------------------------


def _require(data: dict, key: str, path: str = ""):
    if key not in data:
        raise MissingKey(f"{path}{key}")
    return data[key]


def parse_plan(text: str, action_set: ActionSet, env: Environment) -> Plan:
    """Parse and validate raw assistant text against a set and an environment.

    ``env`` is the environment the query was built from; a differing
    ``environment_before`` is recorded as a warning, not an error.
    """
    data = extract_dict(text)
    warnings: list[str] = []

    question = data.get("question") or ""
    if not isinstance(question, str):
        raise SchemaViolation("question", "must be a string")

    if question.strip() and "task_cohesion" not in data:
        # Clarification request without a plan body: nothing to execute.
        return Plan((), (), (), env, env, str(data.get("instruction_summary", "")), question)

    cohesion = _require(data, "task_cohesion")
    if not isinstance(cohesion, dict):
        raise SchemaViolation("task_cohesion", "must be a dictionary")
    raw_sequence = _require(cohesion, "task_sequence", "task_cohesion.")
    raw_instructions = _require(cohesion, "step_instructions", "task_cohesion.")
    raw_object = _require(cohesion, "object_name", "task_cohesion.")
    env_before_data = _require(data, "environment_before")
    env_after_data = _require(data, "environment_after")
    summary = _require(data, "instruction_summary")
    if not isinstance(summary, str):
        raise SchemaViolation("instruction_summary", "must be a string")

    environment_before = environment_from_data(env_before_data, "environment_before")
    environment_after = environment_from_data(env_after_data, "environment_after")

    if not diff_environments(env, environment_before).is_empty:
        warnings.append("environment_before differs from the environment supplied in the query")

    if not isinstance(raw_sequence, list):
        raise SchemaViolation("task_cohesion.task_sequence", "must be a list")
    if not isinstance(raw_instructions, list) or not all(isinstance(s, str) for s in raw_instructions):
        raise SchemaViolation("task_cohesion.step_instructions", "must be a list of strings")

    # object_name: a single entity or a list of them
    if isinstance(raw_object, str):
        object_tokens = [raw_object]
        single = True
    elif isinstance(raw_object, list) and all(isinstance(o, str) for o in raw_object):
        object_tokens = list(raw_object)
        single = False
    else:
        raise SchemaViolation("task_cohesion.object_name", "must be an entity name or a list of them")

    clarification = bool(question.strip())

    resolved_objects: list[str] = []
    for tok in object_tokens:
        if not tok and clarification:
            continue
        try:
            name = normalize_entity(tok)
        except ValueError:
            raise UnknownObject(tok) from None
        resolved = resolve_entity(name, environment_before.objects)
        if resolved is None:
            if clarification:
                continue
            raise UnknownObject(name)
        resolved_objects.append(resolved)
    implicit_object = resolved_objects[0] if len(resolved_objects) >= 1 else None

    if len(raw_sequence) != len(raw_instructions):
        raise LengthMismatch(len(raw_sequence), len(raw_instructions))

    # First pass: parse calls and fill implicit objects.
    parsed: list[tuple[ActionSpec, list[str], str, bool]] = []
    for i, entry in enumerate(raw_sequence):
        spec, tokens, surface = parse_action_call(entry, i, action_set)
        args, needs_target = _fill_implicit_args(spec, tokens, implicit_object, i)
        parsed.append((spec, args, surface, needs_target))

    # Destination resolution: the last unresolved placement per object takes
    # its target from the claimed environment_after; earlier ones are errors.
    last_unresolved: dict[str, int] = {}
    for i, (spec, args, _, needs_target) in enumerate(parsed):
        if needs_target:
            last_unresolved[args[0]] = i
    for i, (spec, args, surface, needs_target) in enumerate(parsed):
        if not needs_target:
            continue
        if last_unresolved.get(args[0]) != i:
            raise UnresolvedTarget(i, spec.name, args[0])
        after_entity = resolve_entity(args[0], environment_after.entities)
        placement = environment_after.placement_of(after_entity) if after_entity else None
        if placement is None or placement.target is None:
            raise UnresolvedTarget(i, spec.name, args[0])
        parsed[i] = (spec, [args[0], placement.target], surface, False)

    # Resolve every argument against the declared entities.
    instances: list[ActionInstance] = []
    entities = environment_before.entities
    for i, (spec, args, surface, _) in enumerate(parsed):
        resolved_args = []
        for arg in args:
            resolved = resolve_entity(arg, entities)
            if resolved is None:
                raise UnknownObject(arg, step_index=i)
            resolved_args.append(resolved)
        instances.append(ActionInstance(spec.name, tuple(resolved_args), surface))

    if single:
        object_field: str | tuple[str, ...] = resolved_objects[0] if resolved_objects else ""
    else:
        object_field = tuple(resolved_objects)

    return Plan(
        task_sequence=tuple(instances),
        step_instructions=tuple(raw_instructions),
        object_name=object_field,
        environment_before=environment_before,
        environment_after=environment_after,
        instruction_summary=summary,
        question=question,
        warnings=tuple(warnings),
    )


# ---------------------------------------------------------------------------
# Structural rules
# ---------------------------------------------------------------------------


def check_structural_rules(plan: Plan, action_set: ActionSet) -> list[RuleViolation]:
    """Evaluate the set's plan-shape rules; an empty list means compliant."""
    if plan.is_clarification:
        return []
    violations: list[RuleViolation] = []
    seq = plan.task_sequence
    for rule in action_set.structural_rules:
        if rule.kind == "first_action":
            if not seq or seq[0].name != rule.action:
                violations.append(
                    RuleViolation(rule, f"the first element of task_sequence must be {rule.action}()", 0)
                )
        elif rule.kind == "last_action":
            if not seq or seq[-1].name != rule.action:
                violations.append(
                    RuleViolation(
                        rule,
                        f"the last element of task_sequence must be {rule.action}()",
                        len(seq) - 1 if seq else 0,
                    )
                )
        elif rule.kind == "no_regrasp":
            holding = False
            for i, act in enumerate(seq):
                if act.name == rule.grasp:
                    if holding:
                        violations.append(
                            RuleViolation(
                                rule,
                                f"{rule.grasp}() must not occur again before {rule.release}()",
                                i,
                            )
                        )
                    holding = True
                elif act.name == rule.release:
                    holding = False
    return violations


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def parse_call_sequence(calls, action_set: ActionSet, env: Environment) -> tuple[ActionInstance, ...]:
    """Parse a list of fully parameterized call strings against an environment."""
    instances = []
    for i, call in enumerate(calls):
        spec, tokens, surface = parse_action_call(call, i, action_set)
        if len(tokens) != spec.arity:
            raise SchemaViolation(f"sequence[{i}]", f"{spec.name} takes {spec.arity} argument(s), got {len(tokens)}")
        args = []
        for tok in tokens:
            resolved = resolve_entity(tok, env.entities)
            if resolved is None:
                raise UnknownObject(tok, step_index=i)
            args.append(resolved)
        instances.append(ActionInstance(spec.name, tuple(args), surface))
    return tuple(instances)


def plan_to_data(plan: Plan) -> dict:
    return {
        "task_cohesion": {
            "task_sequence": [a.render() for a in plan.task_sequence],
            "step_instructions": list(plan.step_instructions),
            "object_name": plan.object_name if isinstance(plan.object_name, str) else list(plan.object_name),
        },
        "environment_before": plan.environment_before.to_data(),
        "environment_after": plan.environment_after.to_data(),
        "instruction_summary": plan.instruction_summary,
        "question": plan.question,
    }


def serialize_plan(plan: Plan) -> str:
    """Five-key JSON document; ``parse_plan`` on the result yields an equal plan."""
    return json.dumps(plan_to_data(plan), indent=4)
