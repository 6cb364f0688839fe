# Replay the automatic feedback loop offline: a scripted backend first emits
# a faulty sequence, the checker verbalizes the error, and the next canned
# reply fixes it. Two rounds of feedback reach a working plan here.

import json

from taskplan import InferenceParams, ScriptedBackend, bundled_action_set, bundled_prompt_set, bundled_scenarios
from taskplan.loop import run_planning_loop
from taskplan.replay import build_feedback_script

vh = bundled_action_set("virtualhome")
scenario = next(s for s in bundled_scenarios() if s.id == 10)

entries = [
    e
    for e in build_feedback_script()
    if json.loads(e["response"])["instruction_summary"].startswith("take the pie on the table")
]
backend = ScriptedBackend.from_list(entries)

result = run_planning_loop(
    scenario.environment,
    scenario.instruction,
    action_set=vh,
    prompt_set=bundled_prompt_set("virtualhome"),
    backend=backend,
    params=InferenceParams(),
    goal=scenario.goal,
    max_rounds=5,
    on_round=lambda n, text: print(f"feedback round {n}: {text}"),
)

print("\noutcome:", result.outcome)
print("rounds used:", result.rounds_used)
print("final sequence:", [a.pretty() for a in result.final_plan.task_sequence])
