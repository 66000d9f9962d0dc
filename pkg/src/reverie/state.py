"""Domain types, token estimation, and the bounded-memory truncation policies.

Everything here is an immutable value; the two truncation operations are pure
functions, so state objects are safe to share across threads.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace

logger = logging.getLogger(__name__)

DEFAULT_CONVERSATION_BUDGET = 20_000
DEFAULT_MONOLOGUE_BUDGET = 10_000
MONOLOGUE_TRIGGER_FRACTION = 0.9
MONOLOGUE_TARGET_FRACTION = 0.8

# Truncation ladder: largest suffix of recent messages that still fits.
RECENT_LADDER = (10, 6, 4, 2)

ROLES = ("system", "user", "assistant")


def estimate_tokens(text: str) -> int:
    """Estimate token count as ceil(chars / 4).

    Deterministic and monotone in text length; empty text estimates 0.
    """
    return math.ceil(len(text) / 4)


@dataclass(frozen=True)
class Message:
    role: str
    content: str
    turn_index: int = 0

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role: {self.role!r}")
        if self.role in ("user", "assistant") and not self.content:
            raise ValueError(f"{self.role} message must have non-empty content")
        if self.turn_index < 0:
            raise ValueError("turn_index must be non-negative")

    @property
    def tokens(self) -> int:
        return estimate_tokens(self.content)


def messages_tokens(messages: list[Message]) -> int:
    return sum(m.tokens for m in messages)


@dataclass(frozen=True)
class ConversationHistory:
    messages: tuple[Message, ...] = ()
    max_tokens: int = DEFAULT_CONVERSATION_BUDGET

    def __post_init__(self):
        last = -1
        for m in self.messages:
            if m.turn_index < last:
                raise ValueError("turn_index must be monotone non-decreasing")
            last = m.turn_index

    @property
    def tokens(self) -> int:
        return messages_tokens(list(self.messages))

    def append(self, message: Message) -> "ConversationHistory":
        return replace(self, messages=self.messages + (message,))


def essential_messages(history: ConversationHistory) -> list[Message]:
    """The first system message and the first user message, in history order."""
    essentials: list[Message] = []
    first_system = next((m for m in history.messages if m.role == "system"), None)
    first_user = next((m for m in history.messages if m.role == "user"), None)
    for m in history.messages:
        if m is first_system or m is first_user:
            essentials.append(m)
    return essentials


def truncate_conversation(history: ConversationHistory) -> ConversationHistory:
    """Enforce the conversation token budget.

    Under budget: returned unchanged. Over budget: keep the essential messages
    (first system + first user) plus the largest recent suffix from the
    RECENT_LADDER that fits; floor is essentials plus the single most recent
    message. Essentials alone over budget are returned as-is with a warning,
    since dropping the system prompt would change agent semantics.
    """
    if history.tokens <= history.max_tokens:
        return history

    essentials = essential_messages(history)
    essential_ids = {id(m) for m in essentials}
    essential_tokens = messages_tokens(essentials)

    if essential_tokens > history.max_tokens:
        logger.warning(
            "essential messages alone exceed budget (%d > %d); keeping them unmodified",
            essential_tokens,
            history.max_tokens,
        )
        return replace(history, messages=tuple(essentials))

    non_essential = [m for m in history.messages if id(m) not in essential_ids]
    for n_recent in RECENT_LADDER:
        recent = non_essential[-n_recent:]
        if essential_tokens + messages_tokens(recent) <= history.max_tokens:
            return replace(history, messages=tuple(essentials + recent))

    recent = non_essential[-1:]
    return replace(history, messages=tuple(essentials + recent))


@dataclass(frozen=True)
class MonologueThreads:
    """One reflection cycle's three parallel thought streams."""

    reasoning: str
    memory: str
    goal: str
    turn_index: int = 0

    def __post_init__(self):
        for name in ("reasoning", "memory", "goal"):
            if not getattr(self, name):
                raise ValueError(f"thread {name!r} must be non-empty")

    def to_json(self) -> str:
        """Canonical serialization: exactly the three keys, in this order."""
        return json.dumps(
            {"reasoning": self.reasoning, "memory": self.memory, "goal": self.goal}
        )

    @classmethod
    def from_payload(cls, payload: dict, turn_index: int = 0) -> "MonologueThreads":
        expected = {"reasoning", "memory", "goal"}
        keys = set(payload)
        if keys != expected:
            raise ValueError(
                f"thread object must have exactly keys {sorted(expected)}, got {sorted(keys)}"
            )
        for k in expected:
            if not isinstance(payload[k], str) or not payload[k]:
                raise ValueError(f"thread {k!r} must be a non-empty string")
        return cls(
            reasoning=payload["reasoning"],
            memory=payload["memory"],
            goal=payload["goal"],
            turn_index=turn_index,
        )


@dataclass(frozen=True)
class MonologueHistory:
    """Self-dialogue history: serialized thread objects as assistant messages."""

    entries: tuple[Message, ...] = ()
    max_tokens: int = DEFAULT_MONOLOGUE_BUDGET

    def __post_init__(self):
        for m in self.entries:
            if m.role != "assistant":
                raise ValueError("monologue history holds assistant entries only")

    @property
    def tokens(self) -> int:
        return messages_tokens(list(self.entries))


def maintain_monologue_history(
    history: MonologueHistory, new_entry: MonologueThreads
) -> MonologueHistory:
    """Append a parsed thread entry and enforce the monologue budget.

    Maintenance triggers when the estimate exceeds 90% of the budget and drops
    the oldest entries until it is at or below 80%. The newest entry always
    survives, even if it alone exceeds the target.
    """
    entries = list(history.entries)
    entries.append(
        Message(role="assistant", content=new_entry.to_json(), turn_index=new_entry.turn_index)
    )
    if messages_tokens(entries) > history.max_tokens * MONOLOGUE_TRIGGER_FRACTION:
        target = history.max_tokens * MONOLOGUE_TARGET_FRACTION
        while len(entries) > 1 and messages_tokens(entries) > target:
            entries.pop(0)
    return replace(history, entries=tuple(entries))


@dataclass(frozen=True)
class InternalNarrative:
    """The bounded first-person narrative, replaced wholesale each cycle.

    ``stale`` is true exactly when the most recent reflection cycle for a
    completed turn failed and the previous narrative was retained.
    """

    text: str
    produced_at_turn: int
    stale: bool = False
