"""Conversation sessions: the glue between the fast path and the thinker.

A session owns the conversation history, the monologue manager, the
controller, the talker, and an introspection event log. The foreground path
(post_message) only ever performs the talker call; reflection work is handed
to the scheduler and swaps the narrative atomically when it succeeds.
"""

from __future__ import annotations

import queue
import threading
import time
import uuid
from dataclasses import dataclass, field, replace
from typing import Any, Optional

from .controller import CognitiveController, ConsolidationError, format_threads
from .gateway import Backend, BackendError, RetryingBackend
from .monologue import InnerMonologue, ReflectionError
from .scheduler import ReflectionScheduler
from .state import (
    ConversationHistory,
    InternalNarrative,
    Message,
    MonologueThreads,
    truncate_conversation,
)
from .talker import Talker

VARIANTS = ("base", "threads_only", "controller_only", "full")


class SessionBusyError(Exception):
    """Another foreground request is already in flight for this session."""


@dataclass(frozen=True)
class AgentConfig:
    variant: str = "full"
    model_id: str = "openai/gpt-4o"
    talker_model_id: Optional[str] = None
    manager_model_id: Optional[str] = None
    controller_model_id: Optional[str] = None
    temperature: float = 0.7
    max_tokens: int = 3_000
    conversation_budget: int = 20_000
    monologue_budget: int = 10_000
    recent_window: int = 6
    retries: int = 2
    worker_cap: int = 8

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant: {self.variant!r}")
        for name in ("conversation_budget", "monologue_budget"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def model_for(self, component: str) -> str:
        return getattr(self, f"{component}_model_id", None) or self.model_id


@dataclass
class Event:
    seq: int
    kind: str
    payload: dict
    ts: float


class EventLog:
    """Ordered per-session introspection events with live fan-out."""

    def __init__(self):
        self._events: list[Event] = []
        self._subscribers: list[queue.Queue] = []
        self._lock = threading.Lock()

    def emit(self, kind: str, payload: dict) -> Event:
        with self._lock:
            event = Event(seq=len(self._events), kind=kind, payload=payload, ts=time.time())
            self._events.append(event)
            subscribers = list(self._subscribers)
        for q in subscribers:
            q.put(event)
        return event

    def subscribe(self, replay: bool = True) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self._lock:
            if replay:
                for event in self._events:
                    q.put(event)
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    def all(self) -> list[Event]:
        with self._lock:
            return list(self._events)

    def kinds(self) -> list[str]:
        return [e.kind for e in self.all()]


class AgentSession:
    def __init__(
        self,
        backend: Backend,
        config: AgentConfig = AgentConfig(),
        session_id: Optional[str] = None,
        scheduler: Optional[ReflectionScheduler] = None,
    ):
        self.session_id = session_id or uuid.uuid4().hex[:12]
        self.config = config
        if config.retries > 0:
            backend = RetryingBackend(backend, max_retries=config.retries)
        self.backend = backend
        self.history = ConversationHistory(max_tokens=config.conversation_budget)
        self.monologue = InnerMonologue(
            backend,
            config.model_for("manager"),
            max_monologue_tokens=config.monologue_budget,
            temperature=config.temperature,
            max_tokens=config.max_tokens,
            recent_window=config.recent_window,
        )
        self.controller = CognitiveController(
            backend,
            config.model_for("controller"),
            temperature=config.temperature,
            max_tokens=config.max_tokens,
        )
        self.talker = Talker(
            backend,
            config.model_for("talker"),
            temperature=config.temperature,
            max_tokens=config.max_tokens,
        )
        self.narrative: Optional[InternalNarrative] = None
        self.turn = 0
        self.events = EventLog()
        self._foreground = threading.Lock()
        self._narrative_lock = threading.Lock()
        self._owns_scheduler = scheduler is None
        self.scheduler = scheduler or ReflectionScheduler(worker_cap=config.worker_cap)
        self.scheduler.register(self.session_id, self._run_reflection)

    # -- foreground path ---------------------------------------------------

    def post_message(self, user_text: str) -> dict[str, Any]:
        """Answer one user turn; reflection is enqueued, never awaited."""
        if not user_text:
            raise ValueError("user message must be non-empty")
        if not self._foreground.acquire(blocking=False):
            raise SessionBusyError(self.session_id)
        try:
            turn = self.turn
            snapshot = self.history
            self.history = self.history.append(
                Message(role="user", content=user_text, turn_index=turn)
            )
            self.events.emit("user_message", {"turn_index": turn, "content": user_text})
            narrative = self._narrative_for_injection()
            start = time.monotonic()
            try:
                result = self.talker.respond(self.history, narrative, turn)
            except BackendError:
                self.history = snapshot
                raise
            latency_ms = int((time.monotonic() - start) * 1000)
            self.history = truncate_conversation(
                self.history.append(
                    Message(role="assistant", content=result.content, turn_index=turn)
                )
            )
            self.turn = turn + 1
            trace = {
                "turn_index": turn,
                "reply": result.content,
                "latency_ms": latency_ms,
                "narrative_injected": narrative is not None,
                "narrative_produced_at_turn": narrative.produced_at_turn if narrative else None,
                "narrative_stale": narrative.stale if narrative else False,
            }
            self.events.emit(
                "talker_response",
                {"turn_index": turn, "content": result.content, "latency_ms": latency_ms},
            )
            if self.config.variant != "base":
                self.scheduler.on_response_delivered(self.session_id, turn)
            return trace
        finally:
            self._foreground.release()

    def _narrative_for_injection(self) -> Optional[InternalNarrative]:
        if self.config.variant == "base":
            return None
        with self._narrative_lock:
            return self.narrative

    # -- background path ---------------------------------------------------

    def _recent_window(self) -> list[Message]:
        return list(truncate_conversation(self.history).messages)[-self.config.recent_window :]

    def _run_reflection(self, turn_index: int) -> None:
        """Reflection job body, wired per ablation variant.

        State is only mutated on success: a failure leaves the monologue
        history and narrative untouched apart from the stale flag, so one bad
        cycle cannot poison later turns.
        """
        self.events.emit("reflection_started", {"turn_index": turn_index})
        variant = self.config.variant
        try:
            with self._narrative_lock:
                previous = self.narrative
            if variant in ("full", "threads_only"):
                threads = self.monologue.reflect(self._recent_window(), turn_index)
                self.events.emit(
                    "threads_produced",
                    {
                        "turn_index": turn_index,
                        "goal": threads.goal,
                        "reasoning": threads.reasoning,
                        "memory": threads.memory,
                    },
                )
                if variant == "full":
                    narrative = self.controller.consolidate(threads, previous)
                else:
                    narrative = InternalNarrative(
                        text=format_threads(threads),
                        produced_at_turn=turn_index,
                        stale=False,
                    )
            else:  # controller_only: the synthesis stage reads the raw window
                digest = "\n".join(
                    f"{m.role.upper()}: {m.content}" for m in self._recent_window()
                )
                narrative = self.controller.consolidate_block(
                    digest or "(no conversation yet)", previous, turn_index
                )
        except (ReflectionError, ConsolidationError, BackendError) as exc:
            self._degrade(turn_index, exc)
            raise
        with self._narrative_lock:
            self.narrative = narrative
        self.events.emit(
            "narrative_updated",
            {
                "turn_index": turn_index,
                "text": narrative.text,
                "stale": False,
                "produced_at_turn": narrative.produced_at_turn,
            },
        )

    def _degrade(self, turn_index: int, exc: Exception) -> None:
        with self._narrative_lock:
            if self.narrative is not None:
                self.narrative = replace(self.narrative, stale=True)
            text = self.narrative.text if self.narrative else ""
            produced = self.narrative.produced_at_turn if self.narrative else None
        self.events.emit(
            "job_failed", {"turn_index": turn_index, "error": str(exc)}
        )
        self.events.emit(
            "narrative_updated",
            {
                "turn_index": turn_index,
                "text": text,
                "stale": True,
                "produced_at_turn": produced,
            },
        )

    # -- utilities -----------------------------------------------------------

    def drain(self, timeout: Optional[float] = None) -> bool:
        """Wait for background reflection to settle (tests, CLI, eval)."""
        return self.scheduler.drain(self.session_id, timeout)

    def state_snapshot(self) -> dict[str, Any]:
        with self._narrative_lock:
            narrative = self.narrative
        return {
            "session_id": self.session_id,
            "turn": self.turn,
            "variant": self.config.variant,
            "conversation": [
                {"role": m.role, "content": m.content, "turn_index": m.turn_index}
                for m in self.history.messages
            ],
            "conversation_tokens": self.history.tokens,
            "monologue_entries": len(self.monologue.history.entries),
            "monologue_tokens": self.monologue.history.tokens,
            "narrative": {
                "text": narrative.text,
                "produced_at_turn": narrative.produced_at_turn,
                "stale": narrative.stale,
            }
            if narrative
            else None,
        }
