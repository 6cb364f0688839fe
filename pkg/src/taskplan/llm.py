"""Chat-completion backends: an OpenAI-compatible HTTP client and a scripted stand-in.

The scripted backend replays canned assistant responses, which makes whole
pipeline runs bit-reproducible and lets the benchmark suite run offline.
Script entries either match on a substring of the last user message
(reusable) or are consumed once in order.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import requests

from .errors import ScriptExhausted, SchemaViolation, Timeout, Transport
from .prompts import Conversation

DEFAULT_ENDPOINT = "https://api.openai.com/v1/chat/completions"
DEFAULT_TIMEOUT = 120.0

Message = dict[str, str]


@dataclass(frozen=True)
class InferenceParams:
    model_name: str = "gpt-3.5-turbo"
    temperature: float = 0.0
    max_response_tokens: int = 1024
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature must be within [0, 2], got {self.temperature}")
        if self.max_response_tokens <= 0:
            raise ValueError("max_response_tokens must be positive")


class Backend(Protocol):
    def complete_messages(self, messages: list[Message], params: InferenceParams) -> str: ...


def conversation_to_messages(conv: Conversation, system_first: bool = False) -> list[Message]:
    """Wire mapping of a conversation; optionally send the first prompt as system."""
    messages = [{"role": role, "content": text} for role, text in conv.turns]
    if system_first and messages and messages[0]["role"] == "user":
        messages[0] = {"role": "system", "content": messages[0]["content"]}
    return messages


def complete(conv: Conversation, params: InferenceParams, backend: Backend, system_first: bool = False) -> str:
    """Run one completion; the conversation is never mutated or reordered."""
    return backend.complete_messages(conversation_to_messages(conv, system_first), params)


# ---------------------------------------------------------------------------
# Scripted backend
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScriptEntry:
    response: str
    match: str | None = None  # substring of the last user message; None = one-shot


class ScriptedBackend:
    """Deterministic canned responses for tests and offline benchmarks."""

    def __init__(self, entries: list[ScriptEntry]):
        self.entries = list(entries)
        self._consumed: set[int] = set()
        self._turn = 0
        self._lock = threading.Lock()

    @classmethod
    def from_list(cls, items: list[dict]) -> "ScriptedBackend":
        entries = []
        for i, item in enumerate(items):
            if "response" not in item:
                raise SchemaViolation(f"script[{i}]", "entry needs a response")
            entries.append(ScriptEntry(response=item["response"], match=item.get("match")))
        return cls(entries)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise SchemaViolation(str(path), "script file not found") from None
        except json.JSONDecodeError as exc:
            raise SchemaViolation(str(path), f"invalid JSON: {exc}") from None
        if not isinstance(data, list):
            raise SchemaViolation(str(path), "script must be a JSON list")
        return cls.from_list(data)

    def complete_messages(self, messages: list[Message], params: InferenceParams) -> str:
        last_user = next((m["content"] for m in reversed(messages) if m["role"] == "user"), "")
        with self._lock:
            self._turn += 1
            for i, entry in enumerate(self.entries):
                if entry.match is None:
                    if i in self._consumed:
                        continue
                    self._consumed.add(i)
                    return entry.response
                if entry.match in last_user:
                    return entry.response
            raise ScriptExhausted(self._turn)


# ---------------------------------------------------------------------------
# HTTP backend
# ---------------------------------------------------------------------------

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


@dataclass
class HttpBackend:
    """OpenAI-compatible chat-completions client with bounded retries."""

    endpoint: str = DEFAULT_ENDPOINT
    api_key: str = ""
    timeout: float = DEFAULT_TIMEOUT
    max_tries: int = 3
    backoff: float = 0.5
    _sleep: object = field(default=time.sleep, repr=False)

    @classmethod
    def from_env(cls) -> "HttpBackend":
        return cls(
            endpoint=os.environ.get("TASKPLAN_ENDPOINT", DEFAULT_ENDPOINT),
            api_key=os.environ.get("TASKPLAN_API_KEY", os.environ.get("OPENAI_API_KEY", "")),
            timeout=float(os.environ.get("TASKPLAN_TIMEOUT", DEFAULT_TIMEOUT)),
        )

    def complete_messages(self, messages: list[Message], params: InferenceParams) -> str:
        payload = {
            "model": params.model_name,
            "messages": messages,
            "temperature": params.temperature,
            "max_tokens": params.max_response_tokens,
        }
        if params.seed is not None:
            payload["seed"] = params.seed
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
            headers["api-key"] = self.api_key  # Azure-style deployments

        last_error: Exception | None = None
        for attempt in range(self.max_tries):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            try:
                response = requests.post(self.endpoint, json=payload, headers=headers, timeout=self.timeout)
            except requests.Timeout:
                last_error = Timeout(self.timeout)
                continue
            except requests.RequestException as exc:
                last_error = Transport(0, str(exc))
                continue
            if response.status_code in _RETRYABLE_STATUS:
                last_error = Transport(response.status_code, response.text)
                continue
            if response.status_code != 200:
                raise Transport(response.status_code, response.text)
            try:
                return response.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError):
                raise Transport(response.status_code, response.text) from None
        raise last_error if last_error else Transport(0, "no response")


def resolve_backend(ref: str) -> Backend:
    """``http`` or ``script:<path>``."""
    if ref == "http":
        return HttpBackend.from_env()
    if ref.startswith("script:"):
        return ScriptedBackend.from_file(ref.split(":", 1)[1])
    raise SchemaViolation("backend", f"unknown backend {ref!r} (use http or script:<file>)")
