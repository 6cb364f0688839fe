"""Command-line entry points: plan, repl, validate, bench, serve.

Exit codes: 0 on success, 1 on validation or executability failure, 2 on
transport or configuration errors. Human-readable output goes to stdout;
pass ``--json`` for machine-stable output built from the same data the
library exposes.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .actions import resolve_action_set
from .bench import bundled_scenarios, load_scenarios, render_report, run_suite
from .env import diff_environments, parse_environment
from .errors import TaskPlanError, Transport, Timeout
from .executor import WorldState, execute_plan, trace_records
from .llm import InferenceParams, resolve_backend
from .loop import LoopResult
from .plan import check_structural_rules, parse_plan, serialize_plan
from .prompts import DEFAULT_BUDGET, resolve_prompt_set
from .sessions import SessionStore

EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _params(model: str, temperature: float, max_tokens: int, seed: int | None) -> InferenceParams:
    return InferenceParams(model_name=model, temperature=temperature, max_response_tokens=max_tokens, seed=seed)


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _print_loop_result(result: LoopResult, as_json: bool) -> None:
    if as_json:
        click.echo(json.dumps(result.to_data(), indent=2))
        return
    click.echo(f"outcome: {result.outcome}")
    click.echo(f"feedback rounds used: {result.rounds_used}")
    for attempt in result.transcript:
        if attempt.errors:
            click.echo(f"  attempt error: {attempt.errors[0].get('message', attempt.errors[0].get('reason', ''))}")
        if attempt.feedback:
            click.echo(f"  feedback sent: {attempt.feedback.text}")
    plan = result.final_plan
    if plan is not None and not plan.is_clarification:
        click.echo("plan:")
        for i, (act, step) in enumerate(zip(plan.task_sequence, plan.step_instructions), 1):
            click.echo(f"  {i}. {act.render():<40} {step}")
        diff = diff_environments(plan.environment_before, plan.environment_after)
        for line in diff.describe() or ["(environment unchanged)"]:
            click.echo(f"  env: {line}")
    elif plan is not None:
        click.echo(f"clarification requested: {plan.question}")


common_model_options = [
    click.option("--model", default="gpt-3.5-turbo", show_default=True, help="Model name sent to the backend."),
    click.option("--temperature", default=0.0, show_default=True, type=float),
    click.option("--max-tokens", "max_tokens", default=1024, show_default=True, type=int),
    click.option("--seed", default=None, type=int),
    click.option("--budget", default=DEFAULT_BUDGET, show_default=True, type=int, help="Token budget for the conversation."),
]


def _with_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return wrap


@click.group()
def main():
    """Translate household instructions into validated robot action plans."""


@main.command("plan")
@click.option("--env", "env_file", required=True, type=click.Path(exists=True), help="Environment JSON file.")
@click.option("--set", "set_ref", default="lfo", show_default=True, help="Action set: lfo, virtualhome, or a file.")
@click.option("--prompts", "prompts_ref", default="", help="Prompt directory (defaults to the action set's bundled prompts).")
@click.option("--instruction", required=True)
@click.option("--backend", "backend_ref", default="http", show_default=True, help="http or script:<file>.")
@click.option("--max-rounds", default=5, show_default=True, type=int)
@click.option("--out", "out_file", default=None, type=click.Path(), help="Write the final plan JSON here.")
@click.option("--json", "as_json", is_flag=True)
@_with_options(common_model_options)
def plan_command(env_file, set_ref, prompts_ref, instruction, backend_ref, max_rounds, out_file, as_json, model, temperature, max_tokens, seed, budget):
    """Plan one instruction and print the loop result."""
    try:
        env = parse_environment(Path(env_file).read_text())
        action_set = resolve_action_set(set_ref)
        prompt_set = resolve_prompt_set(prompts_ref or set_ref)
        backend = resolve_backend(backend_ref)
    except TaskPlanError as exc:
        _fail(exc.message, EXIT_CONFIG)

    from .loop import run_planning_loop

    try:
        result = run_planning_loop(
            env,
            instruction,
            action_set=action_set,
            prompt_set=prompt_set,
            backend=backend,
            params=_params(model, temperature, max_tokens, seed),
            max_rounds=max_rounds,
            budget=budget,
        )
    except (Transport, Timeout) as exc:
        _fail(exc.message, EXIT_CONFIG)
    except TaskPlanError as exc:
        _fail(exc.message, EXIT_FAILURE)

    _print_loop_result(result, as_json)
    if out_file and result.final_plan is not None:
        Path(out_file).write_text(serialize_plan(result.final_plan) + "\n")
    sys.exit(0 if result.outcome == "success" else EXIT_FAILURE)


@main.command("validate")
@click.option("--plan", "plan_file", required=True, type=click.Path(exists=True))
@click.option("--env", "env_file", required=True, type=click.Path(exists=True))
@click.option("--set", "set_ref", default="lfo", show_default=True)
@click.option("--json", "as_json", is_flag=True)
def validate_command(plan_file, env_file, set_ref, as_json):
    """Structural and executability check of a stored plan file."""
    try:
        env = parse_environment(Path(env_file).read_text())
        action_set = resolve_action_set(set_ref)
    except TaskPlanError as exc:
        _fail(exc.message, EXIT_CONFIG)

    report = {"plan": str(plan_file), "ok": False, "stage": None, "detail": None}
    try:
        plan = parse_plan(Path(plan_file).read_text(), action_set, env)
    except TaskPlanError as exc:
        report.update(stage="parse", detail=exc.as_dict())
        click.echo(json.dumps(report, indent=2) if as_json else f"parse failed: {exc.message}")
        sys.exit(EXIT_FAILURE)

    violations = check_structural_rules(plan, action_set)
    if violations:
        report.update(stage="structural_rules", detail=[v.message for v in violations])
        click.echo(json.dumps(report, indent=2) if as_json else f"rule violation: {violations[0].message}")
        sys.exit(EXIT_FAILURE)

    trace = execute_plan(WorldState.from_environment(env), plan, action_set)
    if trace.error is not None:
        report.update(stage="execution", detail=trace.error.to_data())
        if as_json:
            click.echo(json.dumps(report, indent=2))
        else:
            click.echo(f"step {trace.error.step_index + 1} not executable: {trace.error.reason}")
        sys.exit(EXIT_FAILURE)

    claim_diff = diff_environments(trace.final.env, plan.environment_after)
    report.update(ok=True, stage="done", detail={"claim_diff": claim_diff.to_data(), "records": trace_records(trace)})
    if as_json:
        click.echo(json.dumps(report, indent=2))
    else:
        click.echo(f"plan is executable ({len(trace.steps)} steps)")
        if not claim_diff.is_empty:
            click.echo("warning: claimed environment_after differs from execution:")
            for line in claim_diff.describe():
                click.echo(f"  {line}")
    sys.exit(0)


@main.command("bench")
@click.option("--scenarios", "scenarios_file", default=None, type=click.Path(exists=True), help="Scenario JSON file (defaults to the bundled suite).")
@click.option("--set", "set_ref", default="virtualhome", show_default=True)
@click.option("--prompts", "prompts_ref", default="", help="Prompt directory (defaults to the action set's bundled prompts).")
@click.option("--backend", "backend_ref", default="http", show_default=True)
@click.option("--trials", default=1, show_default=True, type=int)
@click.option("--max-rounds", default=0, show_default=True, type=int)
@click.option("--report", "report_format", default="markdown", show_default=True, type=click.Choice(["markdown", "md", "csv"]))
@click.option("--higher-level", is_flag=True, help="Use the higher-level instruction variants.")
@click.option("--out", "out_file", default=None, type=click.Path())
@_with_options(common_model_options)
def bench_command(scenarios_file, set_ref, prompts_ref, backend_ref, trials, max_rounds, report_format, higher_level, out_file, model, temperature, max_tokens, seed, budget):
    """Run a scenario suite and render a success/rounds report."""
    try:
        action_set = resolve_action_set(set_ref)
        prompt_set = resolve_prompt_set(prompts_ref or set_ref)
        backend = resolve_backend(backend_ref)
        scenarios = load_scenarios(scenarios_file, action_set) if scenarios_file else bundled_scenarios(action_set)
    except TaskPlanError as exc:
        _fail(exc.message, EXIT_CONFIG)

    report = run_suite(
        scenarios,
        backend,
        _params(model, temperature, max_tokens, seed),
        action_set=action_set,
        prompt_set=prompt_set,
        trials=trials,
        max_rounds=max_rounds,
        higher_level=higher_level,
        budget=budget,
    )
    fmt = "markdown" if report_format in ("markdown", "md") else "csv"
    text = render_report(report, fmt)
    if out_file:
        Path(out_file).write_text(text)
        click.echo(f"report written to {out_file}")
    else:
        click.echo(text, nl=False)
    sys.exit(0)


@main.command("serve")
@click.option("--port", default=8750, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--sessions-dir", default="sessions", show_default=True)
@click.option("--backend", "backend_ref", default="http", show_default=True)
@click.option("--cors-origin", "cors_origins", multiple=True, default=("*",), show_default=True)
@_with_options(common_model_options)
def serve_command(port, host, sessions_dir, backend_ref, cors_origins, model, temperature, max_tokens, seed, budget):
    """Serve the HTTP API (and the web console, if built, via any static host)."""
    import uvicorn

    from .api import create_app

    try:
        backend = resolve_backend(backend_ref)
    except TaskPlanError as exc:
        _fail(exc.message, EXIT_CONFIG)
    app = create_app(sessions_dir, backend, _params(model, temperature, max_tokens, seed), budget=budget, cors_origins=tuple(cors_origins))
    uvicorn.run(app, host=host, port=port)


@main.command("repl")
@click.option("--env", "env_file", required=True, type=click.Path(exists=True))
@click.option("--set", "set_ref", default="lfo", show_default=True)
@click.option("--prompts", "prompts_ref", default="")
@click.option("--backend", "backend_ref", default="http", show_default=True)
@click.option("--sessions-dir", default="sessions", show_default=True)
@click.option("--max-rounds", default=5, show_default=True, type=int)
@_with_options(common_model_options)
def repl_command(env_file, set_ref, prompts_ref, backend_ref, sessions_dir, max_rounds, model, temperature, max_tokens, seed, budget):
    """Interactive session: instruction, then approve / feedback <text> / quit."""
    try:
        env = parse_environment(Path(env_file).read_text())
        backend = resolve_backend(backend_ref)
        store = SessionStore(sessions_dir)
        session = store.create_session(env, set_ref, prompts_ref or set_ref)
    except TaskPlanError as exc:
        _fail(exc.message, EXIT_CONFIG)

    params = _params(model, temperature, max_tokens, seed)
    click.echo(f"session {session.id} started; type an instruction, or quit")
    pending = None
    while True:
        try:
            line = click.prompt(">", prompt_suffix=" ", default="", show_default=False).strip()
        except (EOFError, click.Abort):
            break
        if not line:
            continue
        if line in ("quit", "exit"):
            break
        try:
            if line == "approve":
                if pending is None:
                    click.echo("nothing to approve")
                    continue
                store.approve(session, pending)
                click.echo("approved; environment advanced")
                pending = None
            elif line.startswith("feedback "):
                result = store.run_human_feedback(session, line[len("feedback "):], backend, params, budget=budget)
                _print_loop_result(result, as_json=False)
                pending = result.final_plan if result.outcome == "success" else None
            else:
                result = store.run_instruction(session, line, backend, params, max_rounds=max_rounds, budget=budget)
                _print_loop_result(result, as_json=False)
                pending = result.final_plan if result.outcome == "success" else None
        except TaskPlanError as exc:
            click.echo(f"error: {exc.message}")
    click.echo(f"session stored in {store.root / session.id}")


if __name__ == "__main__":
    main()
