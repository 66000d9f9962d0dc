"""Chat-completion backend abstraction.

Two implementations share one interface: an OpenRouter-compatible HTTP client
for live runs and a deterministic scripted backend for tests and offline
demos. No other module talks to the network directly.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import httpx

from .state import Message

RETRYABLE_KINDS = {"timeout", "rate_limited", "transport"}
ERROR_KINDS = RETRYABLE_KINDS | {"malformed_response"}

DEFAULT_TEMPERATURE = 0.7
DEFAULT_MAX_TOKENS = 3_000
DEFAULT_RETRIES = 2
DEFAULT_BACKOFF_S = 0.5
DEFAULT_TIMEOUT_S = 60.0
DEFAULT_WORKERS = 8


class BackendError(Exception):
    def __init__(self, kind: str, detail: str):
        if kind not in ERROR_KINDS:
            raise ValueError(f"unknown error kind: {kind!r}")
        super().__init__(f"{kind}: {detail}")
        self.kind = kind
        self.detail = detail

    @property
    def retryable(self) -> bool:
        return self.kind in RETRYABLE_KINDS


@dataclass(frozen=True)
class GenerationRequest:
    model_id: str
    system_prompt: str
    messages: tuple[Message, ...]
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    # Routing metadata for scripted backends and call-log audits; the live
    # backend does not transmit these.
    component: str = ""
    turn_index: int = 0

    def __post_init__(self):
        if not 0 <= self.temperature <= 2:
            raise ValueError("temperature must be in [0, 2]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class GenerationResult:
    content: str
    latency_ms: int
    backend_id: str


@dataclass
class CallRecord:
    component: str
    turn_index: int
    request: GenerationRequest
    ok: bool = True


class Backend:
    """Interface: generate() returns a result or raises BackendError."""

    backend_id = "backend"

    def generate(self, request: GenerationRequest) -> GenerationResult:
        raise NotImplementedError

    def close(self) -> None:
        pass


def generate_with_retries(
    backend: Backend,
    request: GenerationRequest,
    max_retries: int = DEFAULT_RETRIES,
    backoff_s: float = DEFAULT_BACKOFF_S,
    sleep: Callable[[float], None] = time.sleep,
) -> GenerationResult:
    """Retry retryable errors up to max_retries with exponential backoff.

    malformed_response is never retried: the backend answered, the payload is
    just unusable, and re-sending the same request will not fix that.
    """
    attempt = 0
    while True:
        try:
            return backend.generate(request)
        except BackendError as err:
            if not err.retryable or attempt >= max_retries:
                raise
            sleep(backoff_s * (2**attempt))
            attempt += 1


class LiveBackend(Backend):
    """OpenRouter-compatible chat-completions client.

    Endpoint and key come from arguments or the REVERIE_API_URL /
    REVERIE_API_KEY environment variables. A semaphore caps concurrent
    in-flight requests.
    """

    backend_id = "live"

    def __init__(
        self,
        base_url: Optional[str] = None,
        api_key: Optional[str] = None,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        max_concurrency: int = DEFAULT_WORKERS,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.base_url = (base_url or os.getenv("REVERIE_API_URL", "")).rstrip("/")
        self.api_key = api_key or os.getenv("REVERIE_API_KEY", "")
        if not self.base_url:
            raise ValueError("live backend requires an endpoint URL (REVERIE_API_URL)")
        if not self.api_key:
            raise ValueError("live backend requires an API key (REVERIE_API_KEY)")
        self._semaphore = threading.Semaphore(max_concurrency)
        self._client = httpx.Client(
            timeout=timeout_s,
            headers={"Authorization": f"Bearer {self.api_key}"},
            transport=transport,
        )

    def _build_body(self, request: GenerationRequest) -> dict:
        messages = [{"role": "system", "content": request.system_prompt}]
        messages += [{"role": m.role, "content": m.content} for m in request.messages]
        return {
            "model": request.model_id,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }

    def _generate_once(self, request: GenerationRequest) -> GenerationResult:
        start = time.monotonic()
        try:
            with self._semaphore:
                resp = self._client.post(
                    f"{self.base_url}/chat/completions", json=self._build_body(request)
                )
        except httpx.TimeoutException as exc:
            raise BackendError("timeout", str(exc)) from exc
        except httpx.HTTPError as exc:
            raise BackendError("transport", str(exc)) from exc
        latency_ms = int((time.monotonic() - start) * 1000)

        if resp.status_code == 429:
            raise BackendError("rate_limited", resp.text[:500])
        if resp.status_code >= 500:
            raise BackendError("transport", f"HTTP {resp.status_code}: {resp.text[:500]}")
        if resp.status_code >= 400:
            raise BackendError("malformed_response", f"HTTP {resp.status_code}: {resp.text[:500]}")
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
            raise BackendError("malformed_response", f"unexpected body: {resp.text[:500]}") from exc
        if not isinstance(content, str):
            raise BackendError("malformed_response", "completion content is not text")
        return GenerationResult(content=content, latency_ms=latency_ms, backend_id=self.backend_id)

    def generate(self, request: GenerationRequest) -> GenerationResult:
        return self._generate_once(request)

    def close(self) -> None:
        self._client.close()


class RetryingBackend(Backend):
    """Wraps any backend with the retry policy; one gateway call from the
    caller's perspective regardless of internal attempts."""

    def __init__(
        self,
        inner: Backend,
        max_retries: int = DEFAULT_RETRIES,
        backoff_s: float = DEFAULT_BACKOFF_S,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.inner = inner
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self._sleep = sleep
        self.backend_id = inner.backend_id

    def generate(self, request: GenerationRequest) -> GenerationResult:
        return generate_with_retries(
            self.inner, request, self.max_retries, self.backoff_s, self._sleep
        )

    def close(self) -> None:
        self.inner.close()


@dataclass
class PlanEntry:
    """One scripted response, keyed by component x turn x optional substring."""

    component: str
    turn_index: int
    response: Optional[str] = None
    error_kind: Optional[str] = None
    error_detail: str = "scripted failure"
    contains: Optional[str] = None
    latency_ms: int = 0
    delay_s: float = 0.0
    repeat: bool = False

    def key(self) -> tuple:
        return (self.component, self.turn_index, self.contains)

    def matches(self, request: GenerationRequest) -> bool:
        if self.component != request.component or self.turn_index != request.turn_index:
            return False
        if self.contains is not None:
            text = request.system_prompt + "\n" + "\n".join(m.content for m in request.messages)
            return self.contains in text
        return True


class ScriptedBackend(Backend):
    """Deterministic backend: answers from an ordered plan of fixture entries.

    Entries are consumed in plan order (one-shot unless repeat=true), so a
    failure entry followed by a success entry for the same key scripts a
    retry sequence. Unmatched requests fail with malformed_response naming
    the key, so a missing fixture is loud rather than silently wrong.
    """

    backend_id = "scripted"

    def __init__(self, plan: list[PlanEntry]):
        seen = {}
        for entry in plan:
            if entry.error_kind is not None and entry.error_kind not in ERROR_KINDS:
                raise ValueError(f"unknown scripted error kind: {entry.error_kind!r}")
            if entry.response is None and entry.error_kind is None:
                raise ValueError(f"plan entry {entry.key()} has neither response nor error")
            if entry.repeat:
                if entry.key() in seen:
                    raise ValueError(f"ambiguous duplicate repeat entry for key {entry.key()}")
                seen[entry.key()] = entry
        self._plan = list(plan)
        self._consumed = [False] * len(plan)
        self._lock = threading.Lock()
        self.calls: list[CallRecord] = []

    @classmethod
    def from_file(cls, path: str) -> "ScriptedBackend":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls.from_plan_data(raw)

    @classmethod
    def from_plan_data(cls, raw: list[dict]) -> "ScriptedBackend":
        entries = []
        for item in raw:
            error = item.get("error")
            entries.append(
                PlanEntry(
                    component=item["component"],
                    turn_index=item["turn"],
                    response=item.get("response"),
                    error_kind=error.get("kind") if error else None,
                    error_detail=error.get("detail", "scripted failure") if error else "scripted failure",
                    contains=item.get("contains"),
                    latency_ms=item.get("latency_ms", 0),
                    delay_s=item.get("delay_s", 0.0),
                    repeat=item.get("repeat", False),
                )
            )
        return cls(entries)

    def generate(self, request: GenerationRequest) -> GenerationResult:
        with self._lock:
            chosen = None
            for i, entry in enumerate(self._plan):
                if self._consumed[i] or not entry.matches(request):
                    continue
                chosen = entry
                if not entry.repeat:
                    self._consumed[i] = True
                break
            record = CallRecord(request.component, request.turn_index, request)
            self.calls.append(record)
        if chosen is None:
            with self._lock:
                record.ok = False
            raise BackendError(
                "malformed_response",
                f"no scripted entry for key (component={request.component!r}, "
                f"turn={request.turn_index})",
            )
        if chosen.delay_s:
            time.sleep(chosen.delay_s)
        if chosen.error_kind is not None:
            with self._lock:
                record.ok = False
            raise BackendError(chosen.error_kind, chosen.error_detail)
        return GenerationResult(
            content=chosen.response or "",
            latency_ms=chosen.latency_ms,
            backend_id=self.backend_id,
        )

    def call_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for rec in self.calls:
            counts[rec.component] = counts.get(rec.component, 0) + 1
        return counts


def script_backend(plan: list[PlanEntry]) -> ScriptedBackend:
    return ScriptedBackend(plan)


class SyntheticBackend(Backend):
    """Deterministic generator backend for bulk runs (soaks, simulations).

    Produces component-appropriate content without any fixture plan: valid
    three-key JSON for the monologue manager, a short narrative for the
    controller, and a fixed-length reply for the talker.
    """

    backend_id = "synthetic"

    def __init__(self, talker_words: int = 85, delay_s: float = 0.0):
        self.talker_words = talker_words
        self.delay_s = delay_s
        self._lock = threading.Lock()
        self.calls: list[CallRecord] = []

    def generate(self, request: GenerationRequest) -> GenerationResult:
        with self._lock:
            self.calls.append(CallRecord(request.component, request.turn_index, request))
        if self.delay_s:
            time.sleep(self.delay_s)
        t = request.turn_index
        if request.component == "manager":
            content = json.dumps(
                {
                    "reasoning": f"Thinking through the implications of turn {t}.",
                    "memory": f"Noting what the user said on turn {t}.",
                    "goal": f"Help with the request from turn {t}.",
                }
            )
        elif request.component == "controller":
            content = (
                f"I understand the conversation through turn {t}. The most important "
                f"facts so far are stable, and my response strategy is to stay helpful."
            )
        elif request.component == "judge":
            content = "PASS - synthetic verdict"
        else:
            words = [f"word{i}" for i in range(self.talker_words)]
            content = f"Reply to turn {t}: " + " ".join(words)
        return GenerationResult(content=content, latency_ms=0, backend_id=self.backend_id)

    def call_counts(self) -> dict[str, int]:
        with self._lock:
            counts: dict[str, int] = {}
            for rec in self.calls:
                counts[rec.component] = counts.get(rec.component, 0) + 1
            return counts
