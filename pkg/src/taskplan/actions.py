"""Action vocabularies: definitions, preconditions, effects, and prompt rendering.

An action set is loaded from a JSON document and is immutable afterwards.
Two sets ship with the package: a constraint-based manipulation set
(``lfo``, 13 actions whose plans are written as nullary calls with the
manipulated object named separately) and a household-agent set
(``virtualhome``, 9 parameterized atomic actions).

Preconditions and effects are small declarative records evaluated by the
symbolic executor; they reference the action's parameters, the robot hand,
or the agent, never concrete entities (except literal targets in custom
sets).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .env import PREDICATE_KINDS, is_entity_name
from .errors import SchemaViolation, UnknownAction

_DATA_DIR = Path(__file__).with_name("data")

CHECKS = (
    "hand_empty",
    "inside_hand",
    "near",
    "has_placement",
    "on_plane",
    "inside_closed_container",
    "open",
    "closed",
    "openable",
    "switched_on",
    "switched_off",
    "is_object",
)

EFFECT_OPS = ("add", "remove", "clear_placement", "set_near")

RULE_KINDS = ("first_action", "last_action", "no_regrasp")


def _is_param(ref: str) -> bool:
    return isinstance(ref, str) and ref.startswith("param:")


def _param_index(ref: str) -> int:
    return int(ref.split(":", 1)[1])


@dataclass(frozen=True)
class Condition:
    """One precondition; ``negate`` flips it to must-not-hold."""

    check: str
    subject: str = "param:0"  # param:N | hand | agent | link:N
    target: str | None = None  # param:N | <literal> | None
    negate: bool = False

    def validate(self, arity: int, path: str):
        if self.check not in CHECKS:
            raise SchemaViolation(path, f"unknown check {self.check!r}")
        for ref, label in ((self.subject, "subject"), (self.target, "target")):
            if ref is None or ref in ("hand", "agent"):
                continue
            if ref.startswith(("param:", "link:")):
                if _param_index(ref) >= arity:
                    raise SchemaViolation(path, f"{label} {ref} exceeds arity {arity}")
            elif not is_entity_name(ref):
                raise SchemaViolation(path, f"bad {label} {ref!r}")


@dataclass(frozen=True)
class Effect:
    """One state change applied after all preconditions pass."""

    op: str  # add | remove | clear_placement | set_near
    subject: str = "param:0"  # param:N | link:N
    predicate: str | None = None
    target: str | None = None  # param:N | <literal> | None

    def validate(self, arity: int, path: str):
        if self.op not in EFFECT_OPS:
            raise SchemaViolation(path, f"unknown effect op {self.op!r}")
        if self.op in ("add", "remove"):
            if self.predicate not in PREDICATE_KINDS:
                raise SchemaViolation(path, f"unknown predicate {self.predicate!r}")
        for ref, label in ((self.subject, "subject"), (self.target, "target")):
            if ref is None:
                continue
            if ref.startswith(("param:", "link:")):
                if _param_index(ref) >= arity:
                    raise SchemaViolation(path, f"{label} {ref} exceeds arity {arity}")
            elif not is_entity_name(ref):
                raise SchemaViolation(path, f"bad {label} {ref!r}")


@dataclass(frozen=True)
class ActionSpec:
    """Definition of one robot action."""

    name: str
    arity: int
    description: str
    requires_grasp: bool = False
    implicit_object: bool = False
    preconditions: tuple[Condition, ...] = ()
    effects: tuple[Effect, ...] = ()


@dataclass(frozen=True)
class PlanRule:
    """A structural constraint on whole plans, e.g. first-action-must-be."""

    kind: str
    label: str = ""
    action: str = ""  # first_action / last_action
    grasp: str = ""  # no_regrasp
    release: str = ""


@dataclass(frozen=True)
class ActionSet:
    name: str
    actions: tuple[ActionSpec, ...]
    structural_rules: tuple[PlanRule, ...] = ()
    links: dict[str, str] = field(default_factory=dict, hash=False, compare=False)

    @property
    def by_name(self) -> dict[str, ActionSpec]:
        return {a.name: a for a in self.actions}

    def linked_container(self, entity: str) -> str | None:
        return self.links.get(entity)


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def action_set_from_data(data: dict, path: str = "action_set") -> ActionSet:
    if not isinstance(data, dict):
        raise SchemaViolation(path, "action set must be a dictionary")
    name = data.get("name")
    if not name or not isinstance(name, str):
        raise SchemaViolation(f"{path}.name", "missing or invalid name")

    raw_actions = data.get("actions")
    if not isinstance(raw_actions, list):
        raise SchemaViolation(f"{path}.actions", "must be a list")

    actions: list[ActionSpec] = []
    for i, raw in enumerate(raw_actions):
        apath = f"{path}.actions[{i}]"
        if not isinstance(raw, dict):
            raise SchemaViolation(apath, "action must be a dictionary")
        aname = raw.get("name")
        if not aname or not isinstance(aname, str):
            raise SchemaViolation(f"{apath}.name", "missing action name")
        if any(a.name == aname for a in actions):
            raise SchemaViolation(f"{apath}.name", f"duplicate action {aname}")
        arity = raw.get("arity", 0)
        if not isinstance(arity, int) or not 0 <= arity <= 2:
            raise SchemaViolation(f"{apath}.arity", "arity must be 0, 1 or 2")
        description = raw.get("description", "")
        if not isinstance(description, str):
            raise SchemaViolation(f"{apath}.description", "must be a string")

        def parse_conditions(items, cpath):
            out = []
            for j, c in enumerate(items or []):
                cond = Condition(
                    check=c.get("check", ""),
                    subject=c.get("subject", "param:0"),
                    target=c.get("target"),
                    negate=bool(c.get("negate", False)),
                )
                cond.validate(arity, f"{cpath}[{j}]")
                out.append(cond)
            return tuple(out)

        def parse_effects(items, epath):
            out = []
            for j, e in enumerate(items or []):
                eff = Effect(
                    op=e.get("op", ""),
                    subject=e.get("subject", "param:0"),
                    predicate=e.get("predicate"),
                    target=e.get("target"),
                )
                eff.validate(arity, f"{epath}[{j}]")
                out.append(eff)
            return tuple(out)

        actions.append(
            ActionSpec(
                name=aname,
                arity=arity,
                description=description,
                requires_grasp=bool(raw.get("requires_grasp", False)),
                implicit_object=bool(raw.get("implicit_object", False)),
                preconditions=parse_conditions(raw.get("preconditions"), f"{apath}.preconditions"),
                effects=parse_effects(raw.get("effects"), f"{apath}.effects"),
            )
        )

    names = {a.name for a in actions}
    rules: list[PlanRule] = []
    for i, raw in enumerate(data.get("structural_rules", [])):
        rpath = f"{path}.structural_rules[{i}]"
        kind = raw.get("kind")
        if kind not in RULE_KINDS:
            raise SchemaViolation(rpath, f"unknown rule kind {kind!r}")
        rule = PlanRule(
            kind=kind,
            label=raw.get("label", ""),
            action=raw.get("action", ""),
            grasp=raw.get("grasp", ""),
            release=raw.get("release", ""),
        )
        for ref in (rule.action, rule.grasp, rule.release):
            if ref and ref not in names:
                raise SchemaViolation(rpath, f"rule references unknown action {ref!r}")
        rules.append(rule)

    links = {}
    for k, v in (data.get("links") or {}).items():
        if not (is_entity_name(k) and is_entity_name(v)):
            raise SchemaViolation(f"{path}.links.{k}", "links must map entity names to entity names")
        links[k] = v

    return ActionSet(name=name, actions=tuple(actions), structural_rules=tuple(rules), links=links)


def load_action_set(path: str | Path) -> ActionSet:
    """Load and validate an action-set definition file."""
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except FileNotFoundError:
        raise SchemaViolation(str(p), "file not found") from None
    except json.JSONDecodeError as exc:
        raise SchemaViolation(str(p), f"invalid JSON: {exc}") from None
    return action_set_from_data(data, p.name)


def bundled_action_set(name: str) -> ActionSet:
    """Load one of the action sets shipped with the package (``lfo``, ``virtualhome``)."""
    return load_action_set(_DATA_DIR / "action_sets" / f"{name}.json")


def resolve_action_set(ref: str) -> ActionSet:
    """``lfo`` / ``virtualhome`` or a path to a definition file."""
    if ref in ("lfo", "virtualhome"):
        return bundled_action_set(ref)
    return load_action_set(ref)


# ---------------------------------------------------------------------------
# Lookup and rendering
# ---------------------------------------------------------------------------


def _edit_distance(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def suggest_action(action_set: ActionSet, name: str, max_distance: int = 3) -> str | None:
    """Nearest registered action name by edit distance, or None."""
    best, best_d = None, max_distance + 1
    for spec in action_set.actions:
        d = _edit_distance(name, spec.name)
        if d < best_d:
            best, best_d = spec.name, d
    return best


def lookup(action_set: ActionSet, name: str) -> ActionSpec:
    """Exact (case-sensitive) lookup; near misses raise with a suggestion."""
    spec = action_set.by_name.get(name)
    if spec is None:
        raise UnknownAction(name, suggestion=suggest_action(action_set, name))
    return spec


def render_action_prompt(action_set: ActionSet) -> str:
    """Render the action-list prompt section, byte-stable across runs."""
    lines = [
        "Necessary and sufficient robot actions are defined as follows:",
        '"""',
        '"ROBOT ACTION LIST"',
    ]
    for spec in action_set.actions:
        if spec.implicit_object or spec.arity == 0:
            args = ""
        else:
            args = ", ".join(f"arg{i + 1}" for i in range(spec.arity))
        lines.append(f"- {spec.name}({args}): {spec.description}")
    lines.append('"""')
    return "\n".join(lines) + "\n"
