"""Symbolic execution tests: step semantics, traces, goals, claim checks."""

import json
import random
from pathlib import Path

import pytest

from taskplan.actions import bundled_action_set
from taskplan.env import StatePredicate, diff_environments, environment_from_data
from taskplan.executor import (
    GoalSpec,
    StepError,
    WorldState,
    check_goal,
    execute_plan,
    execute_sequence,
    execute_step,
    trace_records,
    trace_to_jsonl,
    verify_claimed_environment,
)
from taskplan.plan import ActionInstance, parse_call_sequence

VH = bundled_action_set("virtualhome")
LFO = bundled_action_set("lfo")

SCENARIOS_FILE = Path(__file__).parents[1] / "src" / "taskplan" / "data" / "scenarios" / "virtualhome.json"
SCENARIOS = json.loads(SCENARIOS_FILE.read_text())


def scenario(n):
    return next(s for s in SCENARIOS if s["id"] == n)


def start_state(sc):
    return WorldState.from_environment(environment_from_data(sc["environment"]))


def reference(sc):
    env = environment_from_data(sc["environment"])
    return parse_call_sequence(sc["reference_sequence"], VH, env)


# ---------------------------------------------------------------------------
# Single-step semantics
# ---------------------------------------------------------------------------


def test_grab_from_closed_container_fails():
    env = environment_from_data(
        {
            "assets": ["<microwave>"],
            "asset_states": {"<microwave>": ["closed()", "near_agent()"]},
            "objects": ["<pie>"],
            "object_states": {"<pie>": "inside_something(<microwave>)"},
        }
    )
    state = WorldState.from_environment(env)
    result = execute_step(state, ActionInstance("Grab", ("<pie>",)), VH)
    assert isinstance(result, StepError)
    assert result.failed.check == "inside_closed_container"
    assert "<pie> is inside closed <microwave>" == result.reason


def test_putin_open_microwave_succeeds():
    env = environment_from_data(
        {
            "assets": ["<microwave>"],
            "asset_states": {"<microwave>": ["open()", "near_agent()"]},
            "objects": ["<pie>"],
            "object_states": {"<pie>": "inside_hand()"},
        }
    )
    state = WorldState.from_environment(env)
    result = execute_step(state, ActionInstance("PutIn", ("<pie>", "<microwave>")), VH)
    assert isinstance(result, WorldState)
    assert result.env.states_of("<pie>") == (StatePredicate("inside_something", "<microwave>"),)
    assert result.hand is None


def test_detach_from_plane_clears_placement():
    env = environment_from_data(
        {
            "assets": ["<shelf_bottom>"],
            "asset_states": {},
            "objects": ["<juice>"],
            "object_states": {"<juice>": ["on_something(<shelf_bottom>)", "inside_hand()"]},
        }
    )
    state = WorldState.from_environment(env)
    result = execute_step(state, ActionInstance("detach_from_plane", ("<juice>",)), LFO)
    assert isinstance(result, WorldState)
    assert result.env.placement_of("<juice>") is None
    assert result.hand == "<juice>"


def test_put_on_doored_container_is_verb_error():
    env = environment_from_data(
        {
            "assets": ["<fridge>"],
            "asset_states": {"<fridge>": ["open()", "near_agent()"]},
            "objects": ["<salmon>"],
            "object_states": {"<salmon>": "inside_hand()"},
        }
    )
    state = WorldState.from_environment(env)
    result = execute_step(state, ActionInstance("Put", ("<salmon>", "<fridge>")), VH)
    assert isinstance(result, StepError)
    assert result.failed.check == "openable" and result.failed.negate


def test_putin_on_plain_surface_is_verb_error():
    env = environment_from_data(
        {
            "assets": ["<kitchentable>"],
            "asset_states": {"<kitchentable>": "near_agent()"},
            "objects": ["<plate>"],
            "object_states": {"<plate>": "inside_hand()"},
        }
    )
    state = WorldState.from_environment(env)
    result = execute_step(state, ActionInstance("PutIn", ("<plate>", "<kitchentable>")), VH)
    assert isinstance(result, StepError)
    assert result.failed.check == "openable" and not result.failed.negate
    assert "container with a door" in result.reason


def test_open_by_rotate_uses_link():
    env = environment_from_data(
        {
            "assets": ["<fridge>"],
            "asset_states": {"<fridge>": "closed()"},
            "objects": ["<fridge_handle>"],
            "object_states": {"<fridge_handle>": ["on_something(<fridge>)", "inside_hand()"]},
        }
    )
    state = WorldState.from_environment(env)
    result = execute_step(state, ActionInstance("open_by_rotate", ("<fridge_handle>",)), LFO)
    assert isinstance(result, WorldState)
    assert result.env.has_state("<fridge>", "open")


def test_unlinked_handle_is_a_step_error():
    env = environment_from_data(
        {
            "assets": ["<cabinet>"],
            "asset_states": {"<cabinet>": "closed()"},
            "objects": ["<knob>"],
            "object_states": {"<knob>": ["on_something(<cabinet>)", "inside_hand()"]},
        }
    )
    state = WorldState.from_environment(env)
    result = execute_step(state, ActionInstance("open_by_rotate", ("<knob>",)), LFO)
    assert isinstance(result, StepError)
    assert "linked" in result.reason


def test_walktowards_clears_previous_near():
    sc = scenario(12)
    state = start_state(sc)
    s1 = execute_step(state, ActionInstance("Walktowards", ("<kitchentable>",)), VH)
    assert s1.agent_near == "<kitchentable>"
    s2 = execute_step(s1, ActionInstance("Walktowards", ("<kitchentable>",)), VH)
    assert s2.agent_near == "<kitchentable>"
    assert sum(1 for e in s2.env.entities if s2.env.has_state(e, "near_agent")) == 1


# ---------------------------------------------------------------------------
# Whole-plan execution
# ---------------------------------------------------------------------------


def test_scenario5_reference_executes_clean():
    sc = scenario(5)
    trace = execute_sequence(start_state(sc), reference(sc), VH)
    assert trace.ok
    assert trace.final.env.placement_of("<book>") == StatePredicate("on_something", "<bookshelf>")


def test_scenario3_without_open_fails_at_putin():
    sc = scenario(3)
    seq = [a for a in reference(sc) if a.name != "Open"]
    trace = execute_sequence(start_state(sc), seq, VH)
    assert trace.error is not None
    assert trace.error.action.name == "PutIn"
    assert trace.error.failed.check == "open"
    assert len(trace.steps) == 3


def test_empty_sequence_trace():
    sc = scenario(8)
    state = start_state(sc)
    trace = execute_sequence(state, [], VH)
    assert trace.ok and trace.steps == () and trace.final == state


def test_all_reference_sequences_execute_and_meet_goals():
    for sc in SCENARIOS:
        trace = execute_sequence(start_state(sc), reference(sc), VH)
        assert trace.ok, f"scenario {sc['id']}: {trace.error and trace.error.reason}"
        met, unmet = check_goal(trace.final, GoalSpec.from_data(sc["goal"]))
        assert met, f"scenario {sc['id']}: unmet {unmet}"


# ---------------------------------------------------------------------------
# Goals
# ---------------------------------------------------------------------------


def test_goal_scenario8_met_after_switch_on():
    sc = scenario(8)
    goal = GoalSpec.from_data(sc["goal"])
    trace = execute_sequence(start_state(sc), reference(sc), VH)
    met, unmet = check_goal(trace.final, goal)
    assert met and unmet == []


def test_goal_scenario8_unmet_initially():
    sc = scenario(8)
    goal = GoalSpec.from_data(sc["goal"])
    met, unmet = check_goal(start_state(sc), goal)
    assert not met
    assert unmet == [("<tv>", StatePredicate("switched_on"), "missing")]


def test_goal_scenario7_met_with_fridge_closed():
    sc = scenario(7)
    trace = execute_sequence(start_state(sc), reference(sc), VH)
    met, _ = check_goal(trace.final, GoalSpec.from_data(sc["goal"]))
    assert met


def test_forbidden_predicate_detected():
    sc = scenario(8)
    trace = execute_sequence(start_state(sc), reference(sc), VH)
    goal = GoalSpec(forbidden=(("<tv>", StatePredicate("switched_on")),))
    met, unmet = check_goal(trace.final, goal)
    assert not met and unmet[0][2] == "forbidden"


# ---------------------------------------------------------------------------
# Claim verification
# ---------------------------------------------------------------------------


def test_verify_claim_matches():
    sc = scenario(5)
    trace = execute_sequence(start_state(sc), reference(sc), VH)
    assert verify_claimed_environment(trace, trace.final.env).is_empty


def test_verify_claim_catches_omission():
    sc = scenario(3)
    trace = execute_sequence(start_state(sc), reference(sc), VH)
    claimed = trace.final.env.replace_states(
        "<microwave>",
        tuple(p for p in trace.final.env.states_of("<microwave>") if p.kind != "switched_on")
        + (StatePredicate("switched_off"),),
    )
    diff = verify_claimed_environment(trace, claimed)
    assert not diff.is_empty
    assert [c.name for c in diff.changed] == ["<microwave>"]


def test_verify_requires_clean_trace():
    sc = scenario(3)
    seq = [a for a in reference(sc) if a.name != "Open"]
    trace = execute_sequence(start_state(sc), seq, VH)
    with pytest.raises(ValueError):
        verify_claimed_environment(trace, trace.final.env)


# ---------------------------------------------------------------------------
# Determinism, frame property, cardinality invariants
# ---------------------------------------------------------------------------


def test_execution_is_deterministic():
    sc = scenario(10)
    t1 = execute_sequence(start_state(sc), reference(sc), VH)
    t2 = execute_sequence(start_state(sc), reference(sc), VH)
    assert trace_to_jsonl(t1) == trace_to_jsonl(t2)


def test_trace_jsonl_schema():
    sc = scenario(3)
    seq = [a for a in reference(sc) if a.name != "Open"]
    trace = execute_sequence(start_state(sc), seq, VH)
    records = trace_records(trace)
    assert [r["ok"] for r in records] == [True, True, True, False]
    assert records[-1]["error"]["reason"].startswith("<microwave>")
    for r in records:
        assert set(r) >= {"index", "action", "args", "ok", "state_digest"}


def _random_walk(seed, steps=25):
    """Drive random actions; failed steps must leave the state untouched."""
    rng = random.Random(seed)
    sc = scenario(rng.choice([1, 3, 7, 10, 11]))
    state = start_state(sc)
    env = state.env
    states_seen = [state]
    for _ in range(steps):
        spec = rng.choice(VH.actions)
        args = tuple(rng.choice(env.entities) for _ in range(spec.arity))
        result = execute_step(state, ActionInstance(spec.name, args), VH)
        if isinstance(result, StepError):
            continue
        states_seen.append(result)
        state = result
        env = state.env
    return states_seen


@pytest.mark.parametrize("seed", range(12))
def test_cardinality_invariants_over_random_walks(seed):
    for state in _random_walk(seed):
        held = [e for e in state.env.entities if state.env.has_state(e, "inside_hand")]
        assert len(held) <= 1
        assert (state.hand in held) if held else state.hand is None
        near = [e for e in state.env.entities if state.env.has_state(e, "near_agent")]
        assert len(near) <= 1
        for e in state.env.entities:
            placements = [p for p in state.env.states_of(e) if p.is_placement]
            assert len(placements) <= 1


@pytest.mark.parametrize("seed", range(12))
def test_frame_property_over_random_steps(seed):
    rng = random.Random(1000 + seed)
    sc = scenario(rng.choice([1, 3, 7, 11]))
    state = start_state(sc)
    for _ in range(30):
        spec = rng.choice(VH.actions)
        args = tuple(rng.choice(state.env.entities) for _ in range(spec.arity))
        result = execute_step(state, ActionInstance(spec.name, args), VH)
        if isinstance(result, StepError):
            continue
        touched = set(args)
        if any(e.op == "set_near" for e in spec.effects):
            touched |= {e for e in state.env.entities if state.env.has_state(e, "near_agent")}
        diff = diff_environments(state.env, result.env)
        for change in diff.changed:
            assert change.name in touched, f"{spec.name} touched unrelated {change.name}"
        state = result
