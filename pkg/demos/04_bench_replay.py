# Reproduce the offline benchmark tables: the no-feedback success matrix
# (5 of 14 scenarios succeed, ~36%) and the feedback-round counts that take
# every scenario to success.

from taskplan import InferenceParams, ScriptedBackend, bundled_scenarios, render_report, run_suite
from taskplan.replay import script_path

scenarios = bundled_scenarios()

backend = ScriptedBackend.from_file(script_path("virtualhome_table3_trial1.json"))
report = run_suite(scenarios, backend, InferenceParams(temperature=2.0), trials=5, max_rounds=0)
print(render_report(report, "markdown"))

backend = ScriptedBackend.from_file(script_path("virtualhome_table4_feedback.json"))
report = run_suite(scenarios, backend, InferenceParams(), trials=1, max_rounds=5)
print(render_report(report, "markdown"))
