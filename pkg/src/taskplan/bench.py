"""Scenario suites, suite execution, and table-style report rendering.

A scenario bundles an instruction, a minimal environment, a checkable goal,
and a reference action sequence. Reference sequences are executed at load
time against their own environments; a scenario file whose references do
not pass its own goals is rejected outright, which makes the bundled suite
self-validating.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .actions import ActionSet, bundled_action_set
from .env import Environment, environment_from_data
from .errors import ReferenceSequenceInvalid, SchemaViolation, TaskPlanError
from .executor import GoalSpec, WorldState, check_goal, execute_sequence
from .llm import Backend, InferenceParams, ScriptedBackend
from .loop import LoopResult, run_planning_loop
from .plan import ActionInstance, parse_call_sequence
from .prompts import DEFAULT_BUDGET, PromptSet, bundled_prompt_set

_DATA_DIR = Path(__file__).with_name("data")


@dataclass(frozen=True)
class Scenario:
    id: int
    instruction: str
    higher_level_instruction: str | None
    environment: Environment
    goal: GoalSpec
    reference_sequence: tuple[ActionInstance, ...]

    def instruction_for(self, higher_level: bool) -> str:
        if higher_level and self.higher_level_instruction:
            return self.higher_level_instruction
        return self.instruction


def load_scenarios(path: str | Path, action_set: ActionSet | None = None) -> list[Scenario]:
    """Load a scenario file and self-validate every reference sequence."""
    action_set = action_set or bundled_action_set("virtualhome")
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except FileNotFoundError:
        raise SchemaViolation(str(p), "file not found") from None
    except json.JSONDecodeError as exc:
        raise SchemaViolation(str(p), f"invalid JSON: {exc}") from None
    if not isinstance(data, list):
        raise SchemaViolation(str(p), "scenario file must be a JSON list")

    scenarios = []
    for i, raw in enumerate(data):
        path_i = f"scenarios[{i}]"
        if not isinstance(raw, dict):
            raise SchemaViolation(path_i, "scenario must be a dictionary")
        for key in ("id", "instruction", "environment", "goal", "reference_sequence"):
            if key not in raw:
                raise SchemaViolation(f"{path_i}.{key}", "missing key")
        env = environment_from_data(raw["environment"], f"{path_i}.environment")
        goal = GoalSpec.from_data(raw["goal"], f"{path_i}.goal")
        for entity, _pred in goal.required + goal.forbidden:
            if entity not in env.entities:
                raise SchemaViolation(f"{path_i}.goal", f"goal references unknown entity {entity}")
        try:
            reference = parse_call_sequence(raw["reference_sequence"], action_set, env)
        except TaskPlanError as exc:
            raise ReferenceSequenceInvalid(str(raw["id"]), exc.message) from None
        scenario = Scenario(
            id=raw["id"],
            instruction=raw["instruction"],
            higher_level_instruction=raw.get("higher_level_instruction"),
            environment=env,
            goal=goal,
            reference_sequence=reference,
        )
        trace = execute_sequence(WorldState.from_environment(env), reference, action_set)
        if trace.error is not None:
            raise ReferenceSequenceInvalid(str(scenario.id), trace.error.reason)
        met, unmet = check_goal(trace.final, goal)
        if not met:
            raise ReferenceSequenceInvalid(str(scenario.id), f"reference sequence leaves goal unmet: {unmet}")
        scenarios.append(scenario)
    return scenarios


def bundled_scenarios(action_set: ActionSet | None = None) -> list[Scenario]:
    return load_scenarios(_DATA_DIR / "scenarios" / "virtualhome.json", action_set)


# ---------------------------------------------------------------------------
# Suite execution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SuiteReport:
    """Per-trial, per-scenario outcomes plus the aggregate rate."""

    scenario_ids: tuple[int, ...]
    trials: int
    max_rounds: int
    higher_level: bool
    success: tuple[tuple[int | None, ...], ...]  # rows = trials
    rounds: tuple[tuple[int | None, ...], ...]
    errors: tuple[tuple[str | None, ...], ...]

    @property
    def errored_cells(self) -> int:
        return sum(1 for row in self.errors for e in row if e is not None)

    @property
    def successes(self) -> int:
        return sum(1 for row in self.success for s in row if s == 1)

    @property
    def counted_cells(self) -> int:
        return len(self.scenario_ids) * self.trials - self.errored_cells

    @property
    def success_rate(self) -> float:
        if self.counted_cells == 0:
            return 0.0
        return self.successes / self.counted_cells

    def rounds_vector(self, trial: int = 0) -> tuple[int | None, ...]:
        return self.rounds[trial]


def run_suite(
    scenarios: list[Scenario],
    backend: Backend,
    params: InferenceParams,
    *,
    action_set: ActionSet | None = None,
    prompt_set: PromptSet | None = None,
    trials: int = 1,
    max_rounds: int = 0,
    higher_level: bool = False,
    budget: int = DEFAULT_BUDGET,
    system_first: bool = False,
    parallelism: int = 1,
) -> SuiteReport:
    """Run every scenario x trial cell through the planning loop and score it."""
    action_set = action_set or bundled_action_set("virtualhome")
    prompt_set = prompt_set or bundled_prompt_set("virtualhome")

    def run_cell(scenario: Scenario) -> tuple[int | None, int | None, str | None]:
        try:
            result: LoopResult = run_planning_loop(
                scenario.environment,
                scenario.instruction_for(higher_level),
                action_set=action_set,
                prompt_set=prompt_set,
                backend=backend,
                params=params,
                goal=scenario.goal,
                max_rounds=max_rounds,
                budget=budget,
                system_first=system_first,
            )
        except TaskPlanError as exc:
            return None, None, f"{exc.code}: {exc.message}"
        return (1 if result.outcome == "success" else 0), result.rounds_used, None

    if isinstance(backend, ScriptedBackend):
        parallelism = 1  # keep cursor consumption deterministic

    success_rows, rounds_rows, error_rows = [], [], []
    for _trial in range(trials):
        if parallelism > 1:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                cells = list(pool.map(run_cell, scenarios))
        else:
            cells = [run_cell(s) for s in scenarios]
        success_rows.append(tuple(c[0] for c in cells))
        rounds_rows.append(tuple(c[1] for c in cells))
        error_rows.append(tuple(c[2] for c in cells))

    return SuiteReport(
        scenario_ids=tuple(s.id for s in scenarios),
        trials=trials,
        max_rounds=max_rounds,
        higher_level=higher_level,
        success=tuple(success_rows),
        rounds=tuple(rounds_rows),
        errors=tuple(error_rows),
    )


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------


def _cell(value: int | None) -> str:
    return "E" if value is None else str(value)


def _rate_line(report: SuiteReport) -> str:
    return (
        f"Success rate: {report.successes}/{report.counted_cells}"
        f" ({report.success_rate:.1%})"
    )


def render_report(report: SuiteReport, fmt: str = "markdown") -> str:
    """Deterministic tabular rendering; trials as rows, scenarios as columns."""
    if fmt not in ("markdown", "csv"):
        raise ValueError(f"unknown report format {fmt!r}")
    if fmt == "csv":
        lines = ["scenario,trial,success,rounds,error"]
        for t in range(report.trials):
            for i, sid in enumerate(report.scenario_ids):
                err = report.errors[t][i] or ""
                lines.append(f"{sid},{t + 1},{_cell(report.success[t][i])},{_cell(report.rounds[t][i])},{err}")
        lines.append(f"success_rate,{report.successes}/{report.counted_cells},{report.success_rate:.1%}")
        return "\n".join(lines) + "\n"

    variant = " (higher-level instructions)" if report.higher_level else ""
    header = "| Scenario | " + " | ".join(str(s) for s in report.scenario_ids) + " |"
    rule = "|---" * (len(report.scenario_ids) + 1) + "|"
    lines = [
        f"# Scenario suite report{variant}",
        "",
        f"Scenarios: {len(report.scenario_ids)}; trials: {report.trials}; max feedback rounds: {report.max_rounds}",
        "",
        "## Success (1) / failure (0) per trial",
        "",
        header,
        rule,
    ]
    for t in range(report.trials):
        lines.append(f"| Trial {t + 1} | " + " | ".join(_cell(v) for v in report.success[t]) + " |")
    lines += ["", "## Feedback rounds per trial", "", header, rule]
    for t in range(report.trials):
        lines.append(f"| Trial {t + 1} | " + " | ".join(_cell(v) for v in report.rounds[t]) + " |")
    lines += ["", _rate_line(report)]
    if report.errored_cells:
        lines.append(f"Errored cells excluded from the rate: {report.errored_cells}")
    return "\n".join(lines) + "\n"
