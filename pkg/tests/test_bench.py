"""Scenario suite loading, replay runs, and report rendering tests."""

import json
from pathlib import Path

import pytest

from taskplan.bench import SuiteReport, bundled_scenarios, load_scenarios, render_report, run_suite
from taskplan.errors import ReferenceSequenceInvalid, SchemaViolation
from taskplan.llm import InferenceParams, ScriptedBackend
from taskplan.replay import build_feedback_script, script_path

SCENARIOS_FILE = Path(__file__).parents[1] / "src" / "taskplan" / "data" / "scenarios" / "virtualhome.json"

TRIAL1_VECTOR = (0, 0, 0, 0, 1, 1, 0, 1, 0, 0, 0, 1, 1, 0)
ROUNDS_VECTOR = (1, 1, 3, 1, 0, 0, 1, 0, 1, 2, 1, 0, 0, 1)


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def test_bundled_file_loads_fourteen_scenarios():
    scenarios = bundled_scenarios()
    assert len(scenarios) == 14
    assert [s.id for s in scenarios] == list(range(1, 15))


def test_scenarios_have_higher_level_variants():
    assert all(s.higher_level_instruction for s in bundled_scenarios())


def test_mutated_reference_is_rejected_at_load(tmp_path):
    data = json.loads(SCENARIOS_FILE.read_text())
    entry = next(s for s in data if s["id"] == 3)
    entry["reference_sequence"] = [c for c in entry["reference_sequence"] if not c.startswith("Open")]
    f = tmp_path / "scenarios.json"
    f.write_text(json.dumps(data))
    with pytest.raises(ReferenceSequenceInvalid) as exc:
        load_scenarios(f)
    assert exc.value.scenario_id == "3"


def test_goal_unmet_reference_is_rejected_at_load(tmp_path):
    data = json.loads(SCENARIOS_FILE.read_text())
    entry = next(s for s in data if s["id"] == 3)
    entry["reference_sequence"] = [c for c in entry["reference_sequence"] if not c.startswith("SwitchOn")]
    f = tmp_path / "scenarios.json"
    f.write_text(json.dumps(data))
    with pytest.raises(ReferenceSequenceInvalid):
        load_scenarios(f)


def test_empty_scenario_list_is_valid(tmp_path):
    f = tmp_path / "scenarios.json"
    f.write_text("[]")
    assert load_scenarios(f) == []


def test_goal_referencing_unknown_entity_rejected(tmp_path):
    data = json.loads(SCENARIOS_FILE.read_text())
    data[0]["goal"]["required"].append(["<ghost>", "open()"])
    f = tmp_path / "scenarios.json"
    f.write_text(json.dumps(data))
    with pytest.raises(SchemaViolation):
        load_scenarios(f)


# ---------------------------------------------------------------------------
# Suite runs
# ---------------------------------------------------------------------------


def test_trial1_replay_matches_published_matrix():
    scenarios = bundled_scenarios()
    backend = ScriptedBackend.from_file(script_path("virtualhome_table3_trial1.json"))
    report = run_suite(scenarios, backend, InferenceParams(temperature=2.0), trials=5, max_rounds=0)
    assert report.success == (TRIAL1_VECTOR,) * 5
    assert report.successes == 25 and report.counted_cells == 70
    assert f"{report.success_rate:.1%}" == "35.7%"


def test_trial1_replay_is_bit_identical_across_runs():
    scenarios = bundled_scenarios()

    def run():
        backend = ScriptedBackend.from_file(script_path("virtualhome_table3_trial1.json"))
        report = run_suite(scenarios, backend, InferenceParams(temperature=2.0), trials=5, max_rounds=0)
        return render_report(report, "markdown"), render_report(report, "csv")

    assert run() == run()


def test_feedback_replay_matches_published_rounds():
    scenarios = bundled_scenarios()
    backend = ScriptedBackend.from_file(script_path("virtualhome_table4_feedback.json"))
    report = run_suite(scenarios, backend, InferenceParams(), trials=1, max_rounds=5)
    assert report.rounds[0] == ROUNDS_VECTOR
    assert report.success[0] == (1,) * 14


def test_zero_trials_report():
    scenarios = bundled_scenarios()
    backend = ScriptedBackend.from_list([])
    report = run_suite(scenarios, backend, InferenceParams(), trials=0, max_rounds=0)
    assert report.successes == 0 and report.counted_cells == 0
    assert report.success_rate == 0.0
    assert "Success rate: 0/0 (0.0%)" in render_report(report, "markdown")


def test_transport_errors_tag_cells_not_crash():
    scenarios = bundled_scenarios()[:2]
    backend = ScriptedBackend.from_list([])  # exhausts immediately
    report = run_suite(scenarios, backend, InferenceParams(), trials=1, max_rounds=0)
    assert report.errors[0][0] is not None
    assert report.errored_cells == 2
    assert report.counted_cells == 0
    text = render_report(report, "markdown")
    assert "Errored cells excluded from the rate: 2" in text


def test_bundled_scripts_in_sync_with_builders():
    regenerated = build_feedback_script()
    bundled = json.loads(script_path("virtualhome_table4_feedback.json").read_text())
    assert regenerated == bundled


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _small_report():
    return SuiteReport(
        scenario_ids=(1, 2, 3),
        trials=2,
        max_rounds=0,
        higher_level=False,
        success=((1, 0, None), (1, 1, 0)),
        rounds=((0, 0, None), (0, 0, 0)),
        errors=((None, None, "llm_transport: boom"), (None, None, None)),
    )


GOLDEN_MARKDOWN = """# Scenario suite report

Scenarios: 3; trials: 2; max feedback rounds: 0

## Success (1) / failure (0) per trial

| Scenario | 1 | 2 | 3 |
|---|---|---|---|
| Trial 1 | 1 | 0 | E |
| Trial 2 | 1 | 1 | 0 |

## Feedback rounds per trial

| Scenario | 1 | 2 | 3 |
|---|---|---|---|
| Trial 1 | 0 | 0 | E |
| Trial 2 | 0 | 0 | 0 |

Success rate: 3/5 (60.0%)
Errored cells excluded from the rate: 1
"""

GOLDEN_CSV = """scenario,trial,success,rounds,error
1,1,1,0,
2,1,0,0,
3,1,E,E,llm_transport: boom
1,2,1,0,
2,2,1,0,
3,2,0,0,
success_rate,3/5,60.0%
"""


def test_markdown_golden():
    assert render_report(_small_report(), "markdown") == GOLDEN_MARKDOWN


def test_csv_golden():
    assert render_report(_small_report(), "csv") == GOLDEN_CSV


def test_higher_level_report_shape():
    report = SuiteReport(
        scenario_ids=tuple(range(1, 15)),
        trials=1,
        max_rounds=0,
        higher_level=True,
        success=((0, 0, 0, 0, 1, 1, 0, 1, 0, 0, 0, 1, 1, 0),),
        rounds=((0,) * 14,),
        errors=((None,) * 14,),
    )
    text = render_report(report, "markdown")
    assert text.startswith("# Scenario suite report (higher-level instructions)")
    assert "| Trial 1 | 0 | 0 | 0 | 0 | 1 | 1 | 0 | 1 | 0 | 0 | 0 | 1 | 1 | 0 |" in text


def test_unknown_format_rejected():
    with pytest.raises(ValueError):
        render_report(_small_report(), "yaml")


def test_higher_level_suite_uses_variant_instruction():
    scenarios = bundled_scenarios()[:1]
    seen = []

    class Spy:
        def complete_messages(self, messages, params):
            seen.append(messages[-1]["content"])
            raise RuntimeError("stop here")

    with pytest.raises(RuntimeError):
        run_suite(scenarios, Spy(), InferenceParams(), trials=1, max_rounds=0, higher_level=True)
    assert "Serve the toast on the table." in seen[0]
