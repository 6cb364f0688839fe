"""Builders for the bundled scripted-backend response files.

The scripts replay two offline benchmarks (the no-feedback trial matrix and
the fix-after-feedback rounds) plus three multi-step role-play sessions for
the manipulation action set. Responses are constructed from the scenario
data and the symbolic executor itself, so claimed post-operation
environments always agree with execution. Run ``python -m taskplan.replay``
to regenerate the files under ``data/scripts/``.
"""

from __future__ import annotations

import json
from pathlib import Path

from .actions import ActionSet, bundled_action_set
from .bench import Scenario, bundled_scenarios
from .env import Environment, environment_from_data
from .executor import WorldState, execute_sequence
from .plan import ActionInstance

_DATA_DIR = Path(__file__).with_name("data")
SCRIPTS_DIR = _DATA_DIR / "scripts"

# Trial-1 outcome per scenario id in the no-feedback benchmark.
TRIAL1_SUCCESS = {1: 0, 2: 0, 3: 0, 4: 0, 5: 1, 6: 1, 7: 0, 8: 1, 9: 0, 10: 0, 11: 0, 12: 1, 13: 1, 14: 0}

# Feedback rounds needed per scenario id in the fix-after-feedback benchmark.
FEEDBACK_ROUNDS = {1: 1, 2: 1, 3: 3, 4: 1, 5: 0, 6: 0, 7: 1, 8: 0, 9: 1, 10: 2, 11: 1, 12: 0, 13: 0, 14: 1}


def _display(entity: str) -> str:
    return entity.strip("<>").split("#")[0]


_VH_TEMPLATES = {
    "Walktowards": "walk towards the {0}",
    "Grab": "grab the {0}",
    "Open": "open the {0}",
    "Close": "close the {0}",
    "Put": "put the {0} on the {1}",
    "PutIn": "put the {0} in the {1}",
    "SwitchOn": "switch on the {0}",
    "SwitchOff": "switch off the {0}",
    "Drink": "drink from the {0}",
}

_LFO_TEMPLATES = {
    "move_hand": "move the hand near the {0}",
    "grasp_object": "grasp the {0}",
    "release_object": "release the {0}",
    "move_object": "move the {0}",
    "detach_from_plane": "pick up the {0}",
    "attach_to_plane": "place the {0} on the {1}",
    "open_by_rotate": "rotate the {0} to open",
    "close_by_rotate": "rotate the {0} to close",
    "adjust_by_rotate": "rotate the {0} to adjust",
    "open_by_slide": "slide the {0} to open",
    "close_by_slide": "slide the {0} to close",
    "adjust_by_slide": "slide the {0} to adjust",
    "wipe_on_plane": "wipe with the {0}",
}


def step_instruction_for(act: ActionInstance, fallback_object: str = "object") -> str:
    names = [_display(a) for a in act.args] or [fallback_object]
    template = _VH_TEMPLATES.get(act.name) or _LFO_TEMPLATES.get(act.name)
    if template is None:
        return f"perform {act.name}"
    return template.format(*names, names[0])


def build_plan_response(
    env_before: Environment,
    sequence: tuple[ActionInstance, ...],
    object_name: str,
    summary: str,
    environment_after: Environment,
    nullary_surface: bool = False,
) -> str:
    """Render one canned assistant reply in the five-key output format."""
    if nullary_surface:
        calls = [f"{a.name}()" for a in sequence]
        fallback = _display(object_name)
        steps = [step_instruction_for(a, fallback) for a in sequence]
    else:
        calls = [f"{a.name}({', '.join(_display_arg(x) for x in a.args)})" for a in sequence]
        steps = [step_instruction_for(a) for a in sequence]
    doc = {
        "task_cohesion": {
            "task_sequence": calls,
            "step_instructions": steps,
            "object_name": object_name,
        },
        "environment_before": env_before.to_data(),
        "environment_after": environment_after.to_data(),
        "instruction_summary": summary,
        "question": "",
    }
    return json.dumps(doc, indent=4)


def _display_arg(entity: str) -> str:
    return entity.strip("<>")


def _executed_after(env: Environment, sequence, action_set: ActionSet) -> Environment:
    trace = execute_sequence(WorldState.from_environment(env), sequence, action_set)
    if trace.error is not None:
        raise ValueError(f"sequence does not execute: {trace.error.reason}")
    return trace.final.env


def _manipulated_object(scenario: Scenario) -> str:
    for act in scenario.reference_sequence:
        if act.name == "Grab":
            return act.args[0]
    for act in scenario.reference_sequence:
        if act.name != "Walktowards" and act.args:
            return act.args[0]
    raise ValueError(f"scenario {scenario.id} has no manipulated object")


# ---------------------------------------------------------------------------
# Benchmark mutants
# ---------------------------------------------------------------------------


def drop_action(sequence, name: str):
    """Delete every step with this action name (omission-of-necessary-steps)."""
    return tuple(a for a in sequence if a.name != name)


def swap_action(sequence, old: str, new: str):
    """Rename matching steps in place (incorrect-verb-selection)."""
    return tuple(ActionInstance(new, a.args) if a.name == old else a for a in sequence)


def _faulty_sequences(scenario: Scenario) -> list[tuple[ActionInstance, ...]]:
    """Faulty attempts for one scenario, worst first, per the two failure patterns."""
    seq = scenario.reference_sequence
    faults: list[tuple[ActionInstance, ...]] = []
    if any(a.name == "Open" for a in seq):
        faults.append(drop_action(seq, "Open"))  # omission of a necessary step
        if any(a.name == "PutIn" for a in seq):
            faults.append(swap_action(seq, "PutIn", "Put"))  # incorrect verb selection
        if any(a.name == "SwitchOn" for a in seq):
            faults.append(drop_action(seq, "SwitchOn"))  # executable but goal unmet
    elif any(a.name == "Put" for a in seq):
        faults.append(swap_action(seq, "Put", "PutIn"))  # incorrect verb selection
    return faults


def _scenario_response(scenario: Scenario, sequence, action_set: ActionSet) -> str:
    """Canned reply for one attempt; the claimed after-state is always the
    intended outcome of the reference sequence, mirroring that post-operation
    estimates stay accurate even when the action sequence is wrong."""
    intended_after = _executed_after(scenario.environment, scenario.reference_sequence, action_set)
    return build_plan_response(
        scenario.environment,
        sequence,
        _manipulated_object(scenario),
        scenario.instruction.rstrip(".").lower(),
        intended_after,
    )


def build_trial1_script(scenarios: list[Scenario] | None = None, action_set: ActionSet | None = None) -> list[dict]:
    """Match-keyed script reproducing the no-feedback trial outcomes."""
    action_set = action_set or bundled_action_set("virtualhome")
    scenarios = scenarios or bundled_scenarios(action_set)
    entries = []
    for sc in scenarios:
        if TRIAL1_SUCCESS[sc.id]:
            sequence = sc.reference_sequence
        else:
            sequence = _faulty_sequences(sc)[0]
        entries.append({"match": sc.instruction, "response": _scenario_response(sc, sequence, action_set)})
    return entries


def build_feedback_script(scenarios: list[Scenario] | None = None, action_set: ActionSet | None = None) -> list[dict]:
    """Sequential script: each scenario fails its budgeted number of times,
    then produces the reference sequence."""
    action_set = action_set or bundled_action_set("virtualhome")
    scenarios = scenarios or bundled_scenarios(action_set)
    entries = []
    for sc in scenarios:
        rounds = FEEDBACK_ROUNDS[sc.id]
        faults = _faulty_sequences(sc)
        if rounds > len(faults):
            raise ValueError(f"scenario {sc.id} has only {len(faults)} fault patterns, {rounds} needed")
        for k in range(rounds):
            entries.append({"response": _scenario_response(sc, faults[k], action_set)})
        entries.append({"response": _scenario_response(sc, sc.reference_sequence, action_set)})
    return entries


# ---------------------------------------------------------------------------
# Role-play sessions (manipulation action set)
# ---------------------------------------------------------------------------

SHELF_ENVIRONMENT = {
    "assets": ["<table>", "<shelf_bottom>", "<shelf_top>", "<trash_bin>", "<floor>"],
    "asset_states": {
        "<shelf_bottom>": "on_something(<table>)",
        "<trash_bin>": "on_something(<floor>)",
    },
    "objects": ["<spam>", "<juice>"],
    "object_states": {
        "<spam>": "on_something(<table>)",
        "<juice>": "on_something(<shelf_bottom>)",
    },
}

FRIDGE_ENVIRONMENT = {
    "assets": ["<floor>", "<fridge>"],
    "asset_states": {"<fridge>": ["on_something(<floor>)", "closed()"]},
    "objects": ["<fridge_handle>", "<juice>"],
    "object_states": {
        "<fridge_handle>": "on_something(<fridge>)",
        "<juice>": "inside_something(<fridge>)",
    },
}

WINDOW_ENVIRONMENT = {
    "assets": ["<desk>", "<window>", "<trash_bin>", "<floor>"],
    "asset_states": {"<trash_bin>": "on_something(<floor>)"},
    "objects": ["<sponge>"],
    "object_states": {"<sponge>": "on_something(<desk>)"},
}


def _move_to(obj: str, target: str) -> list[tuple]:
    return [
        ("move_hand",),
        ("grasp_object", obj),
        ("detach_from_plane", obj),
        ("move_object", obj),
        ("attach_to_plane", obj, target),
        ("release_object", obj),
    ]


SHELF_SESSION = {
    "environment": SHELF_ENVIRONMENT,
    "steps": [
        ("Put the juice on top of the shelf.", "<juice>", _move_to("<juice>", "<shelf_top>")),
        ("Throw the spam into the trash bin.", "<spam>", _move_to("<spam>", "<trash_bin>")),
        ("Move the juice from the top shelf to the table.", "<juice>", _move_to("<juice>", "<table>")),
        ("Throw the juice into the trash bin.", "<juice>", _move_to("<juice>", "<trash_bin>")),
    ],
}

FRIDGE_SESSION = {
    "environment": FRIDGE_ENVIRONMENT,
    "steps": [
        (
            "Open the fridge door.",
            "<fridge_handle>",
            [("move_hand",), ("grasp_object", "<fridge_handle>"), ("open_by_rotate", "<fridge_handle>"), ("release_object", "<fridge_handle>")],
        ),
        (
            "Open the fridge door a bit wider.",
            "<fridge_handle>",
            [("move_hand",), ("grasp_object", "<fridge_handle>"), ("adjust_by_rotate", "<fridge_handle>"), ("release_object", "<fridge_handle>")],
        ),
        (
            "Take the juice out of the fridge and put it on the floor.",
            "<juice>",
            _move_to("<juice>", "<floor>"),
        ),
        (
            "Close the fridge door.",
            "<fridge_handle>",
            [("move_hand",), ("grasp_object", "<fridge_handle>"), ("close_by_rotate", "<fridge_handle>"), ("release_object", "<fridge_handle>")],
        ),
    ],
}

WINDOW_SESSION = {
    "environment": WINDOW_ENVIRONMENT,
    "steps": [
        (
            "Take the sponge from the desk and wipe the window with it.",
            "<sponge>",
            [
                ("move_hand",),
                ("grasp_object", "<sponge>"),
                ("detach_from_plane", "<sponge>"),
                ("move_object", "<sponge>"),
                ("attach_to_plane", "<sponge>", "<window>"),
                ("wipe_on_plane", "<sponge>"),
                ("release_object", "<sponge>"),
            ],
        ),
        ("Return the sponge to the desk.", "<sponge>", _move_to("<sponge>", "<desk>")),
        ("Throw the sponge into the trash bin.", "<sponge>", _move_to("<sponge>", "<trash_bin>")),
    ],
}


def build_session_script(session: dict, action_set: ActionSet | None = None) -> list[dict]:
    """Match-keyed responses for a chained multi-instruction session."""
    action_set = action_set or bundled_action_set("lfo")
    env = environment_from_data(session["environment"])
    entries = []
    for instruction, obj, raw_actions in session["steps"]:
        sequence = tuple(ActionInstance(a[0], tuple(a[1:])) for a in raw_actions)
        after = _executed_after(env, sequence, action_set)
        response = build_plan_response(
            env, sequence, obj, instruction.rstrip(".").lower(), after, nullary_surface=True
        )
        entries.append({"match": instruction, "response": response})
        env = after
    return entries


FEEDBACK_DEMO_INSERT = "Insert another move_object() to move the juice upward."
FEEDBACK_DEMO_OMIT = "In this case, you can omit one move_object() that moves the juice upward"


def build_feedback_demo_script(action_set: ActionSet | None = None) -> list[dict]:
    """Adjusting one plan through verbatim natural-language feedback."""
    action_set = action_set or bundled_action_set("lfo")
    env = environment_from_data(SHELF_ENVIRONMENT)
    instruction, obj, raw_actions = SHELF_SESSION["steps"][0]
    base = tuple(ActionInstance(a[0], tuple(a[1:])) for a in raw_actions)
    extended = base[:4] + (ActionInstance("move_object", (obj,)),) + base[4:]
    after = _executed_after(env, base, action_set)
    summary = instruction.rstrip(".").lower()
    return [
        {"match": instruction, "response": build_plan_response(env, base, obj, summary, after, nullary_surface=True)},
        {
            "match": FEEDBACK_DEMO_INSERT,
            "response": build_plan_response(env, extended, obj, summary, after, nullary_surface=True),
        },
        {
            "match": FEEDBACK_DEMO_OMIT,
            "response": build_plan_response(env, base, obj, summary, after, nullary_surface=True),
        },
    ]


# ---------------------------------------------------------------------------
# File generation
# ---------------------------------------------------------------------------

SCRIPT_BUILDERS = {
    "virtualhome_table3_trial1.json": build_trial1_script,
    "virtualhome_table4_feedback.json": build_feedback_script,
    "lfo_shelf_session.json": lambda: build_session_script(SHELF_SESSION),
    "lfo_fridge_session.json": lambda: build_session_script(FRIDGE_SESSION),
    "lfo_window_session.json": lambda: build_session_script(WINDOW_SESSION),
    "lfo_feedback_demo.json": build_feedback_demo_script,
}


def script_path(name: str) -> Path:
    return SCRIPTS_DIR / name


def write_scripts(directory: Path | None = None) -> list[Path]:
    directory = directory or SCRIPTS_DIR
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, builder in SCRIPT_BUILDERS.items():
        path = directory / name
        path.write_text(json.dumps(builder(), indent=2) + "\n")
        written.append(path)
    return written


if __name__ == "__main__":
    for path in write_scripts():
        print(f"wrote {path}")
