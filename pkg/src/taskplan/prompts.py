"""Prompt loading, query instantiation, and token-budgeted conversation assembly.

A prompt set is five fixed text files plus a query template. The template
carries the literal placeholders ``[ENVIRONMENT]`` and ``[INSTRUCTION]``,
each exactly once. Conversations always open with the five fixed prompts as
separate user turns, each acknowledged by the assistant; past exchanges are
then included whole, newest first, as far as the token budget allows, and
the current query comes last.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .env import Environment, serialize_environment
from .errors import BudgetTooSmall, MissingFile, PlaceholderError, SchemaViolation

_DATA_DIR = Path(__file__).with_name("data")

ACK_TEXT = "Waiting for next input."
DEFAULT_BUDGET = 4096

PROMPT_FILES = (
    ("role_prompt", "role.txt"),
    ("action_prompt", "actions.txt"),
    ("environment_rules_prompt", "environment.txt"),
    ("output_format_prompt", "output_format.txt"),
    ("examples_prompt", "examples.txt"),
    ("query_template", "query_template.txt"),
)

Turn = tuple[str, str]  # (role, text)


@dataclass(frozen=True)
class PromptSet:
    role_prompt: str
    action_prompt: str
    environment_rules_prompt: str
    output_format_prompt: str
    examples_prompt: str
    query_template: str

    @property
    def fixed_prompts(self) -> tuple[str, ...]:
        return (
            self.role_prompt,
            self.action_prompt,
            self.environment_rules_prompt,
            self.output_format_prompt,
            self.examples_prompt,
        )


@dataclass(frozen=True)
class Conversation:
    turns: tuple[Turn, ...]
    token_estimate: int

    def last_user_text(self) -> str:
        for role, text in reversed(self.turns):
            if role == "user":
                return text
        return ""

    def with_turns(self, extra: Sequence[Turn], estimator: Callable[[str], int] | None = None) -> "Conversation":
        est = estimator or estimate_tokens
        added = sum(est(text) for _, text in extra)
        return Conversation(self.turns + tuple(extra), self.token_estimate + added)


def estimate_tokens(text: str) -> int:
    """Deterministic estimate: one token per four UTF-8 bytes, rounded up."""
    return (len(text.encode("utf-8")) + 3) // 4


def load_prompt_set(directory: str | Path) -> PromptSet:
    """Read the six prompt files and validate the template placeholders."""
    directory = Path(directory)
    values = {}
    for attr, filename in PROMPT_FILES:
        path = directory / filename
        if not path.is_file():
            raise MissingFile(filename.removesuffix(".txt"))
        text = path.read_text()
        if not text.strip():
            raise SchemaViolation(str(path), "prompt file is empty")
        values[attr] = text
    template = values["query_template"]
    for marker in ("[ENVIRONMENT]", "[INSTRUCTION]"):
        count = template.count(marker)
        if count != 1:
            raise PlaceholderError("query_template", marker, count)
    return PromptSet(**values)


def bundled_prompt_set(name: str) -> PromptSet:
    return load_prompt_set(_DATA_DIR / "prompts" / name)


def resolve_prompt_set(ref: str) -> PromptSet:
    """``lfo`` / ``virtualhome`` or a path to a prompt directory."""
    if ref in ("lfo", "virtualhome"):
        return bundled_prompt_set(ref)
    return load_prompt_set(ref)


def instantiate_query(template: str, env: Environment, instruction: str) -> str:
    """Substitute the two placeholders; everything else stays byte-identical."""
    return template.replace("[ENVIRONMENT]", serialize_environment(env)).replace(
        "[INSTRUCTION]", json.dumps(instruction)
    )


def build_conversation(
    prompt_set: PromptSet,
    history: Sequence[Sequence[Turn]],
    env: Environment,
    instruction: str,
    budget: int = DEFAULT_BUDGET,
    estimator: Callable[[str], int] = estimate_tokens,
) -> Conversation:
    """Assemble the full multi-turn conversation under a token budget.

    ``history`` is a sequence of past exchanges, oldest first; each exchange
    is a sequence of (role, text) turns. Exchanges are included whole,
    newest first, and dropped oldest first; the five fixed prompts and the
    current query are always present.
    """
    fixed: list[Turn] = []
    for prompt in prompt_set.fixed_prompts:
        fixed.append(("user", prompt))
        fixed.append(("assistant", ACK_TEXT))
    query: Turn = ("user", instantiate_query(prompt_set.query_template, env, instruction))

    base_cost = sum(estimator(text) for _, text in fixed) + estimator(query[1])
    if base_cost > budget:
        raise BudgetTooSmall(base_cost, budget)

    exchange_costs = [sum(estimator(text) for _, text in exchange) for exchange in history]
    included: list[int] = []
    remaining = budget - base_cost
    for idx in range(len(history) - 1, -1, -1):
        cost = exchange_costs[idx]
        if cost <= remaining:
            included.append(idx)
            remaining -= cost
        else:
            break  # never a partial exchange, never skip newer to fit older

    turns = list(fixed)
    total = base_cost
    for idx in sorted(included):
        turns.extend(history[idx])
        total += exchange_costs[idx]
    turns.append(query)
    return Conversation(tuple(turns), total)
