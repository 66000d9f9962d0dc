"""Stage 3: the immediate user-facing response.

The talker sees the truncated conversation plus, when available, the most
recently produced narrative as one trailing system message. It never waits
on background reflection and never leaks internal state into the reply.
"""

from __future__ import annotations

from .gateway import Backend, GenerationRequest, GenerationResult
from .monologue import load_prompt
from .state import ConversationHistory, InternalNarrative, Message, truncate_conversation

NARRATIVE_PREFIX = "My Current Internal Narrative:\n"


class Talker:
    def __init__(
        self,
        backend: Backend,
        model_id: str,
        temperature: float = 0.7,
        max_tokens: int = 3_000,
    ):
        self.backend = backend
        self.model_id = model_id
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.system_prompt = load_prompt("talker")

    def build_messages(
        self, history: ConversationHistory, narrative: InternalNarrative | None
    ) -> list[Message]:
        messages = list(truncate_conversation(history).messages)
        if narrative is not None:
            turn = messages[-1].turn_index if messages else 0
            messages.append(
                Message(
                    role="system",
                    content=NARRATIVE_PREFIX + narrative.text,
                    turn_index=turn,
                )
            )
        return messages

    def respond(
        self,
        history: ConversationHistory,
        narrative: InternalNarrative | None,
        turn_index: int,
    ) -> GenerationResult:
        """One generate call; BackendError surfaces to the caller."""
        request = GenerationRequest(
            model_id=self.model_id,
            system_prompt=self.system_prompt,
            messages=tuple(self.build_messages(history, narrative)),
            temperature=self.temperature,
            max_tokens=self.max_tokens,
            component="talker",
            turn_index=turn_index,
        )
        return self.backend.generate(request)
