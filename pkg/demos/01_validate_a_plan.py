# Validate a stored plan against an environment: structural rules first,
# then symbolic execution, then a check of the claimed post-operation state.

import json

from taskplan import (
    bundled_action_set,
    check_structural_rules,
    diff_environments,
    execute_plan,
    parse_environment,
    parse_plan,
    WorldState,
)
from taskplan.replay import SHELF_ENVIRONMENT, script_path

lfo = bundled_action_set("lfo")
env = parse_environment(json.dumps(SHELF_ENVIRONMENT))

# The first canned reply of the shelf session doubles as a plan fixture.
response = json.loads(script_path("lfo_shelf_session.json").read_text())[0]["response"]
plan = parse_plan(response, lfo, env)

print("actions:", [a.render() for a in plan.task_sequence])
print("object: ", plan.object_name)

violations = check_structural_rules(plan, lfo)
print("rule violations:", violations or "none")

trace = execute_plan(WorldState.from_environment(env), plan, lfo)
print("executable:", trace.error is None)

claim_diff = diff_environments(trace.final.env, plan.environment_after)
print("claimed environment accurate:", claim_diff.is_empty)

for line in diff_environments(env, trace.final.env).describe():
    print("change:", line)
