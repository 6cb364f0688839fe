# Step through a household scenario symbolically and watch a broken variant
# fail: deleting Open(microwave) makes the container-placement step
# inapplicable, which is exactly what a simulator would refuse.

from taskplan import bundled_action_set, bundled_scenarios, execute_sequence, WorldState
from taskplan.replay import drop_action

vh = bundled_action_set("virtualhome")
scenario = next(s for s in bundled_scenarios() if s.id == 3)

print("instruction:", scenario.instruction)
state = WorldState.from_environment(scenario.environment)

trace = execute_sequence(state, scenario.reference_sequence, vh)
print("\nreference sequence:")
for act, after in trace.steps:
    held = after.hand or "-"
    print(f"  {act.pretty():<28} hand={held:<12} near={after.agent_near}")
print("final pie state:", [p.render() for p in trace.final.env.states_of('<pie>')])

broken = drop_action(scenario.reference_sequence, "Open")
trace = execute_sequence(state, broken, vh)
print("\nwithout Open(microwave):")
print(f"  fails at step {trace.error.step_index + 1}: {trace.error.action.pretty()}")
print(f"  reason: {trace.error.reason}")
