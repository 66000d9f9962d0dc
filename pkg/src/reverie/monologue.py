"""Stage 1 of the compression pipeline: the inner monologue manager.

Generates the three parallel thought streams (goal, reasoning, memory) in a
single backend call and maintains the bounded self-dialogue history. The
continuation prompt that triggers each cycle is ephemeral: it is sent to the
model but never persisted, so the stored history reads as an unbroken
assistant self-dialogue.
"""

from __future__ import annotations

import json
from importlib import resources
from typing import Optional

from .gateway import Backend, BackendError, GenerationRequest
from .state import (
    Message,
    MonologueHistory,
    MonologueThreads,
    maintain_monologue_history,
)

RECENT_WINDOW = 6

CONTINUE_INSTRUCTION = (
    "Continue thinking about the ongoing conversation. Here is the recent "
    "conversation between the user and me:"
)
EMPTY_CONVERSATION_MARKER = "(the conversation has not started yet)"
FORMAT_REMINDER = (
    "Reminder: respond with ONLY a valid JSON object with exactly the three "
    'keys "reasoning", "memory", and "goal", each mapping to a string.'
)


class ReflectionError(Exception):
    """Thread generation failed after all repair attempts."""


def load_prompt(name: str) -> str:
    return resources.files("reverie.prompts").joinpath(f"{name}.txt").read_text(encoding="utf-8")


def continuation_prompt(recent_conversation: list[Message], turn_index: int = 0) -> Message:
    """Build the ephemeral continue-thinking user message.

    Byte-stable for identical inputs; embeds the recent conversation verbatim
    in order, or an explicit empty marker when there is none.
    """
    if recent_conversation:
        body = "\n".join(f"{m.role.upper()}: {m.content}" for m in recent_conversation)
    else:
        body = EMPTY_CONVERSATION_MARKER
    return Message(
        role="user",
        content=f"{CONTINUE_INSTRUCTION}\n\n{body}",
        turn_index=turn_index,
    )


def _strip_code_fences(text: str) -> str:
    stripped = text.strip()
    if stripped.startswith("```"):
        first_newline = stripped.find("\n")
        if first_newline != -1:
            stripped = stripped[first_newline + 1 :]
        if stripped.rstrip().endswith("```"):
            stripped = stripped.rstrip()[:-3]
    return stripped.strip()


def _first_balanced_object(text: str) -> Optional[str]:
    start = text.find("{")
    if start == -1:
        return None
    depth = 0
    in_string = False
    escape = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
    return None


def parse_threads(completion: str, turn_index: int) -> MonologueThreads:
    """Parse a completion into threads, repairing common formatting slips.

    Repair ladder: direct parse, then strip markdown code fences, then
    extract the first balanced {...} substring. Raises ValueError when none
    of these yield a valid strict three-key object.
    """
    candidates = [completion, _strip_code_fences(completion)]
    balanced = _first_balanced_object(completion)
    if balanced is not None:
        candidates.append(balanced)
    last_error: Optional[Exception] = None
    for candidate in candidates:
        try:
            payload = json.loads(candidate)
        except json.JSONDecodeError as exc:
            last_error = exc
            continue
        if not isinstance(payload, dict):
            last_error = ValueError("completion is not a JSON object")
            continue
        return MonologueThreads.from_payload(payload, turn_index=turn_index)
    raise ValueError(f"could not parse thread object: {last_error}")


class InnerMonologue:
    """Owns the monologue history and the single-call reflection cycle."""

    def __init__(
        self,
        backend: Backend,
        model_id: str,
        max_monologue_tokens: int = 10_000,
        temperature: float = 0.7,
        max_tokens: int = 3_000,
        recent_window: int = RECENT_WINDOW,
    ):
        self.backend = backend
        self.model_id = model_id
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.recent_window = recent_window
        self.system_prompt = load_prompt("monologue")
        self.history = MonologueHistory(max_tokens=max_monologue_tokens)

    def reflect(self, recent_conversation: list[Message], turn_index: int) -> MonologueThreads:
        """Run one reflection cycle and persist the parsed result.

        The history is only appended on a successful parse, so a failed cycle
        cannot corrupt the self-dialogue.
        """
        window = recent_conversation[-self.recent_window :]
        prompt = continuation_prompt(window, turn_index=turn_index)
        completion = self._call(list(self.history.entries) + [prompt], turn_index)
        try:
            threads = parse_threads(completion, turn_index)
        except ValueError:
            # One bounded re-ask with an explicit format reminder, then give up.
            retry_prompt = Message(
                role="user",
                content=prompt.content + "\n\n" + FORMAT_REMINDER,
                turn_index=turn_index,
            )
            completion = self._call(list(self.history.entries) + [retry_prompt], turn_index)
            try:
                threads = parse_threads(completion, turn_index)
            except ValueError as exc:
                raise ReflectionError(str(exc)) from exc
        self.history = maintain_monologue_history(self.history, threads)
        return threads

    def _call(self, messages: list[Message], turn_index: int) -> str:
        request = GenerationRequest(
            model_id=self.model_id,
            system_prompt=self.system_prompt,
            messages=tuple(messages),
            temperature=self.temperature,
            max_tokens=self.max_tokens,
            component="manager",
            turn_index=turn_index,
        )
        return self.backend.generate(request).content
