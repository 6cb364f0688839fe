"""Task planning for household robots with a chat LLM.

Instructions and a textual environment go in; a validated sequence of robot
actions and an updated environment come out. A symbolic executor checks
each plan's executability, automatic feedback messages steer the model
toward a working sequence, and sessions chain the post-operation
environment into the next query.
"""

from .actions import (
    ActionSet,
    ActionSpec,
    bundled_action_set,
    load_action_set,
    lookup,
    render_action_prompt,
    resolve_action_set,
)
from .bench import Scenario, SuiteReport, bundled_scenarios, load_scenarios, render_report, run_suite
from .env import (
    EnvDiff,
    Environment,
    StatePredicate,
    apply_diff,
    diff_environments,
    parse_environment,
    serialize_environment,
)
from .executor import (
    ExecutionTrace,
    GoalSpec,
    StepError,
    WorldState,
    check_goal,
    execute_plan,
    execute_sequence,
    execute_step,
    trace_to_jsonl,
    verify_claimed_environment,
)
from .llm import HttpBackend, InferenceParams, ScriptedBackend, complete, resolve_backend
from .loop import (
    FeedbackMessage,
    GoalUnmet,
    LoopResult,
    generate_feedback,
    run_planning_loop,
    validate_response,
)
from .plan import ActionInstance, Plan, RuleViolation, check_structural_rules, parse_plan, serialize_plan
from .prompts import (
    Conversation,
    PromptSet,
    build_conversation,
    bundled_prompt_set,
    estimate_tokens,
    instantiate_query,
    load_prompt_set,
    resolve_prompt_set,
)
from .sessions import Exchange, Session, SessionStore

__version__ = "0.1.0"

__all__ = [
    "ActionInstance",
    "ActionSet",
    "ActionSpec",
    "Conversation",
    "EnvDiff",
    "Environment",
    "Exchange",
    "ExecutionTrace",
    "FeedbackMessage",
    "GoalSpec",
    "GoalUnmet",
    "HttpBackend",
    "InferenceParams",
    "LoopResult",
    "Plan",
    "PromptSet",
    "RuleViolation",
    "Scenario",
    "ScriptedBackend",
    "Session",
    "SessionStore",
    "StatePredicate",
    "StepError",
    "SuiteReport",
    "WorldState",
    "apply_diff",
    "build_conversation",
    "bundled_action_set",
    "bundled_prompt_set",
    "bundled_scenarios",
    "check_goal",
    "check_structural_rules",
    "complete",
    "diff_environments",
    "estimate_tokens",
    "execute_plan",
    "execute_sequence",
    "execute_step",
    "generate_feedback",
    "instantiate_query",
    "load_action_set",
    "load_prompt_set",
    "load_scenarios",
    "lookup",
    "parse_environment",
    "parse_plan",
    "render_action_prompt",
    "render_report",
    "resolve_action_set",
    "resolve_backend",
    "resolve_prompt_set",
    "run_planning_loop",
    "run_suite",
    "serialize_environment",
    "serialize_plan",
    "trace_to_jsonl",
    "validate_response",
    "verify_claimed_environment",
]
