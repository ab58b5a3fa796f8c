"""Chat-completion plumbing for language-model backed experts.

Prompt text is assembled from swappable templates, so wording changes are a
configuration edit rather than a code change. The retrieved exemplar, when
present, is fenced into its own clearly-labeled region: it is reference
material from a past success, and the directives tell the model not to
continue it. Scoring replies are parsed with a first-number rule mapped onto
[0, 1].

Credentials are read from an environment variable named in the backend
configuration, never from the config itself, and are not echoed into logs or
serialized requests.
"""

from __future__ import annotations

import os
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

from .errors import (
    BackendConfigError,
    ExpertUnavailableError,
    ProviderError,
    ScoreParseError,
)
from .trajectory import Trajectory, serialize_trajectory


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str


@dataclass
class ChatRequest:
    messages: list[ChatMessage]
    temperature: float = 0.0
    max_tokens: int = 256
    timeout: float = 60.0

    def __post_init__(self) -> None:
        if not self.messages or self.messages[0].role != "system":
            raise ValueError("the first chat message must carry the system role")


@dataclass(frozen=True)
class PromptTemplates:
    system_act: str = (
        "You are one expert on a small council solving a task step by step. "
        "Reply with exactly one next action in the required format and nothing else."
    )
    system_evaluate: str = (
        "You are one expert on a small council judging a partial solution. "
        "Reply with a single score and nothing else."
    )
    exemplar_header: str = (
        "Reference: a past successful trajectory. It is context only; do not continue it."
    )
    exemplar_footer: str = "End of reference."
    current_header: str = "Current trajectory:"
    act_directive: str = "Propose the single next action."
    evaluate_directive: str = (
        "Rate how promising the current trajectory is on a 0 to 10 scale, "
        "where 0 is hopeless and 10 is certain success. Reply with the score only."
    )


DEFAULT_TEMPLATES = PromptTemplates()


@dataclass
class PromptBundle:
    """A composed prompt, kept in regions until rendered to chat messages."""

    mode: str
    task_instruction: str
    current_text: str
    exemplar_text: str | None
    templates: PromptTemplates = field(default_factory=PromptTemplates)

    def to_messages(self) -> list[ChatMessage]:
        t = self.templates
        system = t.system_act if self.mode == "act" else t.system_evaluate
        parts = [f"Task: {self.task_instruction}"]
        if self.exemplar_text is not None:
            parts.append(f"{t.exemplar_header}\n{self.exemplar_text}{t.exemplar_footer}")
        directive = t.act_directive if self.mode == "act" else t.evaluate_directive
        parts.append(f"{t.current_header}\n{self.current_text}{directive}")
        return [
            ChatMessage(role="system", content=system),
            ChatMessage(role="user", content="\n\n".join(parts)),
        ]


def compose_prompt(
    task_instruction: str,
    prefix: Trajectory,
    exemplar: Trajectory | None,
    mode: str,
    templates: PromptTemplates = DEFAULT_TEMPLATES,
) -> PromptBundle:
    """Build the prompt for one act or evaluate call.

    Deterministic in its inputs. The exemplar region is present exactly when
    an exemplar is supplied and never interleaves with the current-trajectory
    region.
    """
    if mode not in ("act", "evaluate"):
        raise ValueError(f"unknown prompt mode: {mode}")
    return PromptBundle(
        mode=mode,
        task_instruction=task_instruction,
        current_text=serialize_trajectory(prefix),
        exemplar_text=None if exemplar is None else serialize_trajectory(exemplar),
        templates=templates,
    )


_NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?")


def parse_score(text: str) -> float:
    """Extract an evaluation score from free text and map it to [0, 1].

    The first number in the reply wins. A value written with a decimal point
    that already lies in [0, 1] is taken as-is; anything else is read on the
    0 to 10 scale and divided by ten. The result is clamped to [0, 1].
    """
    match = _NUMBER_RE.search(text)
    if match is None:
        raise ScoreParseError(f"no numeric score in reply: {text!r}")
    raw = match.group(0)
    value = float(raw)
    if "." in raw and 0.0 <= value <= 1.0:
        scaled = value
    else:
        scaled = value / 10.0
    return min(1.0, max(0.0, scaled))


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------


@dataclass
class BackendUsage:
    requests: int = 0
    input_chars: int = 0
    output_chars: int = 0


class Backend(Protocol):
    backend_id: str
    usage: BackendUsage

    def send(self, request: ChatRequest) -> str:
        """Execute one completion. Raises ProviderError on transient failure
        and BackendConfigError on misconfiguration."""
        ...


class StubBackend:
    """Offline backend for tests and dry runs.

    Replies come from a list (cycled) or a callable. A positive ``failures``
    makes the first N sends raise the configured exception, which is how the
    retry path gets exercised.
    """

    def __init__(
        self,
        replies: list[str] | Callable[[ChatRequest], str] = ("0",),
        backend_id: str = "stub",
        failures: int = 0,
        failure_exc: type[Exception] = ProviderError,
    ):
        self.backend_id = backend_id
        self._replies = replies
        self._calls = 0
        self._failures = failures
        self._failure_exc = failure_exc
        self.usage = BackendUsage()
        self.requests_seen: list[ChatRequest] = []

    def send(self, request: ChatRequest) -> str:
        self.requests_seen.append(request)
        self.usage.requests += 1
        self.usage.input_chars += sum(len(m.content) for m in request.messages)
        if self._calls < self._failures:
            self._calls += 1
            raise self._failure_exc("stub backend failure")
        self._calls += 1
        if callable(self._replies):
            reply = self._replies(request)
        else:
            replies = list(self._replies)
            reply = replies[(self._calls - 1 - self._failures) % len(replies)]
        self.usage.output_chars += len(reply)
        return reply


class HTTPBackend:
    """OpenAI-style chat completion endpoint over HTTP.

    The API key is read from the process environment at send time; a missing
    or rejected credential is a configuration error, not a retriable one.
    ``concurrency`` caps in-flight requests per backend.
    """

    def __init__(
        self,
        backend_id: str,
        endpoint: str,
        model: str,
        credential_env: str,
        concurrency: int = 4,
    ):
        self.backend_id = backend_id
        self.endpoint = endpoint
        self.model = model
        self.credential_env = credential_env
        self.usage = BackendUsage()
        self._gate = threading.Semaphore(concurrency)

    def send(self, request: ChatRequest) -> str:
        import requests as _requests

        key = os.environ.get(self.credential_env, "")
        if not key:
            raise BackendConfigError(
                f"no credential in environment variable {self.credential_env}"
            )
        body = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        with self._gate:
            self.usage.requests += 1
            self.usage.input_chars += sum(len(m.content) for m in request.messages)
            try:
                response = _requests.post(
                    self.endpoint,
                    json=body,
                    headers={"Authorization": f"Bearer {key}"},
                    timeout=request.timeout,
                )
            except _requests.RequestException as exc:
                raise ProviderError(f"transport failure: {exc.__class__.__name__}") from exc
        if response.status_code in (401, 403):
            raise BackendConfigError(f"credential rejected (HTTP {response.status_code})")
        if response.status_code >= 400:
            raise ProviderError(f"backend returned HTTP {response.status_code}")
        try:
            content = response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise ProviderError("malformed completion payload") from exc
        self.usage.output_chars += len(content)
        return str(content)


def complete(
    backend: Backend,
    request: ChatRequest,
    retries: int = 1,
    backoff: float = 0.25,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """Run one completion with a single retry under exponential backoff.

    Transient provider failures are retried once; exhausting the budget
    raises ExpertUnavailableError. Configuration errors pass straight
    through, retrying cannot fix them.
    """
    last: ProviderError | None = None
    for attempt in range(retries + 1):
        try:
            return backend.send(request)
        except ProviderError as exc:
            last = exc
            if attempt < retries:
                sleep(backoff * (2.0 ** attempt))
    raise ExpertUnavailableError(f"backend {backend.backend_id} unavailable: {last}") from last


def request_for(
    bundle: PromptBundle, temperature: float, max_tokens: int = 256, timeout: float = 60.0
) -> ChatRequest:
    return ChatRequest(
        messages=bundle.to_messages(),
        temperature=temperature,
        max_tokens=max_tokens,
        timeout=timeout,
    )


__all__ = [
    "ChatMessage",
    "ChatRequest",
    "PromptTemplates",
    "DEFAULT_TEMPLATES",
    "PromptBundle",
    "compose_prompt",
    "parse_score",
    "BackendUsage",
    "Backend",
    "StubBackend",
    "HTTPBackend",
    "complete",
    "request_for",
]
