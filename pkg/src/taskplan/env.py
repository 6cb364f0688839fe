"""Environment model: entities, state predicates, parsing, serialization, diffs.

The working environment is a dictionary with four keys. ``assets`` are
non-manipulable entities (shelves, tables), ``objects`` are manipulable ones
(cans, handles). Spatial relationships are expressed through a closed set of
state predicates attached to entities, e.g. ``on_something(<table>)``.

Environments are immutable after construction; every mutation produces a new
value, which keeps them safe to share between threads.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field

from .errors import MalformedJson, SchemaViolation

ENTITY_RE = re.compile(r"^<([a-z0-9_]+)(?:#(\d+))?>$")
BARE_NAME_RE = re.compile(r"^([a-z0-9_]+)(?:#(\d+))?$")
PREDICATE_RE = re.compile(r"^([a-z_]+)\((.*)\)$")

PLACEMENT_KINDS = ("on_something", "inside_something")

PREDICATE_KINDS = (
    "on_something",
    "inside_something",
    "inside_hand",
    "closed",
    "open",
    "switched_on",
    "switched_off",
    "near_agent",
)

# kinds that require a <target> argument
TARGETED_KINDS = frozenset(PLACEMENT_KINDS)

# kinds that can never coexist on one entity
EXCLUSIVE_PAIRS = (
    frozenset({"closed", "open"}),
    frozenset({"switched_on", "switched_off"}),
    frozenset(PLACEMENT_KINDS),
)


# ---------------------------------------------------------------------------
# Entity names
# ---------------------------------------------------------------------------


def is_entity_name(name: str) -> bool:
    return bool(ENTITY_RE.match(name))


def split_entity(name: str) -> tuple[str, str | None]:
    """Return (base, id) for ``<base#id>``; id is None when absent."""
    m = ENTITY_RE.match(name)
    if not m:
        raise ValueError(f"not an entity name: {name!r}")
    return m.group(1), m.group(2)


def entities_match(a: str, b: str) -> bool:
    """Equality that ignores the numeric id suffix unless both sides carry one."""
    base_a, id_a = split_entity(a)
    base_b, id_b = split_entity(b)
    if base_a != base_b:
        return False
    if id_a is not None and id_b is not None:
        return id_a == id_b
    return True


def normalize_entity(token: str) -> str:
    """Accept ``<name>``, ``<name#3>`` or a bare ``name`` and return bracketed form."""
    token = token.strip().strip('"').strip("'")
    if ENTITY_RE.match(token):
        return token
    if BARE_NAME_RE.match(token):
        return f"<{token}>"
    raise ValueError(f"not an entity name: {token!r}")


def bare_name(entity: str) -> str:
    """``<fridge#3>`` -> ``fridge#3``; used when rendering action calls."""
    return entity[1:-1] if entity.startswith("<") and entity.endswith(">") else entity


def resolve_entity(name: str, candidates: tuple[str, ...]) -> str | None:
    """Find ``name`` among ``candidates`` using id-suffix-tolerant matching.

    Exact string matches win; otherwise the first fuzzy match in candidate
    order is returned (deterministic).
    """
    if name in candidates:
        return name
    for cand in candidates:
        if entities_match(name, cand):
            return cand
    return None


# ---------------------------------------------------------------------------
# State predicates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StatePredicate:
    """One state assertion about an entity, e.g. ``on_something(<table>)``."""

    kind: str
    target: str | None = None

    def __post_init__(self):
        if self.kind not in PREDICATE_KINDS:
            raise SchemaViolation(self.kind, "unknown state kind")
        if self.kind in TARGETED_KINDS:
            if not self.target:
                raise SchemaViolation(self.kind, "this state requires a <target>")
            if not is_entity_name(self.target):
                raise SchemaViolation(self.kind, f"bad target {self.target!r}")
        elif self.target is not None:
            raise SchemaViolation(self.kind, "this state takes no target")

    @classmethod
    def parse(cls, text: str, path: str = "state") -> "StatePredicate":
        m = PREDICATE_RE.match(text.strip())
        if not m:
            raise SchemaViolation(path, f"cannot parse state {text!r}")
        kind, arg = m.group(1), m.group(2).strip()
        try:
            return cls(kind, arg or None)
        except SchemaViolation as exc:
            raise SchemaViolation(path, exc.reason) from None

    def render(self) -> str:
        return f"{self.kind}({self.target})" if self.target else f"{self.kind}()"

    @property
    def is_placement(self) -> bool:
        return self.kind in PLACEMENT_KINDS


def _states_from_value(value, path: str) -> tuple[StatePredicate, ...]:
    """Accept a single state string or a list of them."""
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, list):
        raise SchemaViolation(path, "states must be a string or a list of strings")
    preds = []
    for i, item in enumerate(value):
        if not isinstance(item, str):
            raise SchemaViolation(f"{path}[{i}]", "state must be a string")
        preds.append(StatePredicate.parse(item, f"{path}[{i}]"))
    seen = set()
    for p in preds:
        if p in seen:
            raise SchemaViolation(path, f"duplicate state {p.render()}")
        seen.add(p)
    kinds = {p.kind for p in preds}
    for pair in EXCLUSIVE_PAIRS:
        if len(kinds & pair) > 1:
            raise SchemaViolation(path, f"states {sorted(kinds & pair)} cannot coexist")
    return tuple(preds)


# ---------------------------------------------------------------------------
# Environment
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class Environment:
    """Immutable scene description. Equality is order-insensitive."""

    assets: tuple[str, ...]
    asset_states: dict[str, tuple[StatePredicate, ...]]
    objects: tuple[str, ...]
    object_states: dict[str, tuple[StatePredicate, ...]]

    @property
    def entities(self) -> tuple[str, ...]:
        return self.assets + self.objects

    def is_object(self, name: str) -> bool:
        return name in self.objects

    def states_of(self, name: str) -> tuple[StatePredicate, ...]:
        if name in self.object_states:
            return self.object_states[name]
        return self.asset_states.get(name, ())

    def placement_of(self, name: str) -> StatePredicate | None:
        for p in self.states_of(name):
            if p.is_placement:
                return p
        return None

    def has_state(self, name: str, kind: str) -> bool:
        return any(p.kind == kind for p in self.states_of(name))

    def replace_states(self, name: str, preds: tuple[StatePredicate, ...]) -> "Environment":
        """Return a copy with ``name``'s states replaced (order preserved)."""
        if name in self.objects:
            states = dict(self.object_states)
            states[name] = preds
            return Environment(self.assets, dict(self.asset_states), self.objects, states)
        if name in self.assets:
            states = dict(self.asset_states)
            if preds:
                states[name] = preds
            else:
                states.pop(name, None)
            return Environment(self.assets, states, self.objects, dict(self.object_states))
        raise KeyError(name)

    def to_data(self) -> dict:
        """Wire form: one state renders as a string, several as a list."""

        def block(states: dict[str, tuple[StatePredicate, ...]]) -> dict:
            out = {}
            for name, preds in states.items():
                if not preds:
                    continue
                rendered = [p.render() for p in preds]
                out[name] = rendered[0] if len(rendered) == 1 else rendered
            return out

        return {
            "assets": list(self.assets),
            "asset_states": block(self.asset_states),
            "objects": list(self.objects),
            "object_states": block(self.object_states),
        }

    def canonical_data(self) -> dict:
        """Sorted, list-valued form used for digests and comparisons."""
        return {
            "assets": sorted(self.assets),
            "asset_states": {
                n: sorted(p.render() for p in self.asset_states.get(n, ())) for n in sorted(self.assets) if self.asset_states.get(n)
            },
            "objects": sorted(self.objects),
            "object_states": {n: sorted(p.render() for p in self.object_states[n]) for n in sorted(self.objects)},
        }

    def digest(self) -> str:
        blob = json.dumps(self.canonical_data(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Environment):
            return NotImplemented
        return self.canonical_data() == other.canonical_data()

    def __repr__(self) -> str:
        return f"Environment(assets={list(self.assets)}, objects={list(self.objects)})"


def environment_from_data(data, path: str = "environment") -> Environment:
    """Validate a decoded dictionary into an Environment."""
    if not isinstance(data, dict):
        raise SchemaViolation(path, "environment must be a dictionary")
    if "environment" in data and set(data) == {"environment"}:
        return environment_from_data(data["environment"], f"{path}.environment")

    required = ("assets", "asset_states", "objects", "object_states")
    for key in required:
        if key not in data:
            raise SchemaViolation(f"{path}.{key}", "missing key")
    for key in data:
        if key not in required:
            raise SchemaViolation(f"{path}.{key}", "unexpected key")

    def name_list(value, key: str) -> tuple[str, ...]:
        if not isinstance(value, list):
            raise SchemaViolation(f"{path}.{key}", "must be a list")
        names = []
        for item in value:
            if not isinstance(item, str) or not is_entity_name(item):
                raise SchemaViolation(f"{path}.{key}", f"bad entity name {item!r}")
            if item in names:
                raise SchemaViolation(f"{path}.{key}", f"duplicate entity {item}")
            names.append(item)
        return tuple(names)

    assets = name_list(data["assets"], "assets")
    objects = name_list(data["objects"], "objects")
    overlap = set(assets) & set(objects)
    if overlap:
        raise SchemaViolation(f"{path}.objects", f"entities {sorted(overlap)} appear in both assets and objects")

    entities = set(assets) | set(objects)

    def state_block(value, key: str, allowed: tuple[str, ...]) -> dict[str, tuple[StatePredicate, ...]]:
        if not isinstance(value, dict):
            raise SchemaViolation(f"{path}.{key}", "must be a dictionary")
        out: dict[str, tuple[StatePredicate, ...]] = {}
        for name, raw in value.items():
            if name not in allowed:
                raise SchemaViolation(f"{path}.{key}.{name}", "state for an undeclared entity")
            preds = _states_from_value(raw, f"{path}.{key}.{name}")
            for p in preds:
                if p.target and p.target not in entities:
                    raise SchemaViolation(f"{path}.{key}.{name}", f"dangling target {p.target}")
            out[name] = preds
        return out

    asset_states = state_block(data["asset_states"], "asset_states", assets)
    object_states = state_block(data["object_states"], "object_states", objects)

    for obj in objects:
        if not object_states.get(obj):
            raise SchemaViolation(f"{path}.object_states.{obj}", "every object needs at least one state")

    return Environment(assets, asset_states, objects, object_states)


def parse_environment(text: str) -> Environment:
    """Parse a JSON document, with or without the outer ``environment`` key."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedJson(f"invalid JSON: {exc}") from exc
    if isinstance(data, dict) and "environment" in data:
        return environment_from_data(data["environment"])
    return environment_from_data(data)


def serialize_environment(env: Environment) -> str:
    """Render with stable key order; ``parse(serialize(e)) == e``."""
    return json.dumps(env.to_data(), indent=4)


# ---------------------------------------------------------------------------
# Diffs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EntityChange:
    name: str
    added: tuple[StatePredicate, ...] = ()
    removed: tuple[StatePredicate, ...] = ()


@dataclass(frozen=True)
class EntityEntry:
    name: str
    kind: str  # "asset" | "object"
    states: tuple[StatePredicate, ...] = ()


@dataclass(frozen=True)
class EnvDiff:
    """State changes needed to turn one environment into another."""

    changed: tuple[EntityChange, ...] = ()
    added_entities: tuple[EntityEntry, ...] = ()
    removed_entities: tuple[EntityEntry, ...] = ()

    @property
    def is_empty(self) -> bool:
        return not (self.changed or self.added_entities or self.removed_entities)

    def describe(self) -> list[str]:
        lines = []
        for entry in self.removed_entities:
            lines.append(f"{entry.name} disappeared")
        for entry in self.added_entities:
            states = ", ".join(p.render() for p in entry.states) or "no states"
            lines.append(f"{entry.name} appeared ({states})")
        for ch in self.changed:
            bits = [f"-{p.render()}" for p in ch.removed] + [f"+{p.render()}" for p in ch.added]
            lines.append(f"{ch.name}: " + ", ".join(bits))
        return lines

    def to_data(self) -> dict:
        return {
            "changed": [
                {
                    "name": c.name,
                    "added": [p.render() for p in c.added],
                    "removed": [p.render() for p in c.removed],
                }
                for c in self.changed
            ],
            "added_entities": [
                {"name": e.name, "kind": e.kind, "states": [p.render() for p in e.states]} for e in self.added_entities
            ],
            "removed_entities": [
                {"name": e.name, "kind": e.kind, "states": [p.render() for p in e.states]} for e in self.removed_entities
            ],
        }


def diff_environments(before: Environment, after: Environment) -> EnvDiff:
    """Entity-wise set difference with deterministic ordering."""
    before_names = set(before.entities)
    after_names = set(after.entities)

    changed = []
    for name in before.entities:
        if name not in after_names:
            continue
        old = before.states_of(name)
        new = after.states_of(name)
        removed = tuple(p for p in old if p not in set(new))
        added = tuple(p for p in new if p not in set(old))
        if removed or added:
            changed.append(EntityChange(name, added, removed))

    def entry(env: Environment, name: str) -> EntityEntry:
        kind = "object" if env.is_object(name) else "asset"
        return EntityEntry(name, kind, env.states_of(name))

    removed_entities = tuple(entry(before, n) for n in before.entities if n not in after_names)
    added_entities = tuple(entry(after, n) for n in after.entities if n not in before_names)
    return EnvDiff(tuple(changed), added_entities, removed_entities)


def apply_diff(diff: EnvDiff, env: Environment) -> Environment:
    """Apply a diff produced by :func:`diff_environments`; inverse of diff."""
    assets = [a for a in env.assets]
    objects = [o for o in env.objects]
    asset_states = dict(env.asset_states)
    object_states = dict(env.object_states)

    for entry in diff.removed_entities:
        if entry.kind == "asset":
            assets.remove(entry.name)
            asset_states.pop(entry.name, None)
        else:
            objects.remove(entry.name)
            object_states.pop(entry.name, None)

    for entry in diff.added_entities:
        if entry.kind == "asset":
            assets.append(entry.name)
            if entry.states:
                asset_states[entry.name] = entry.states
        else:
            objects.append(entry.name)
            object_states[entry.name] = entry.states

    result = Environment(tuple(assets), asset_states, tuple(objects), object_states)
    for ch in diff.changed:
        old = result.states_of(ch.name)
        kept = tuple(p for p in old if p not in set(ch.removed))
        result = result.replace_states(ch.name, kept + ch.added)
    return result
