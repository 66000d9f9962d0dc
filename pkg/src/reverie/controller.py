"""Stage 2: narrative synthesis.

The controller sees only the latest thought streams and the previous
narrative, never the raw conversation, and regenerates the narrative
wholesale each cycle. On failure the caller keeps the previous narrative and
marks it stale; malformed controller output never flows downstream.
"""

from __future__ import annotations

from .gateway import Backend, BackendError, GenerationRequest
from .monologue import load_prompt
from .state import InternalNarrative, Message, MonologueThreads

STREAMS_HEADER = "LATEST INNER MONOLOGUE STREAMS:"
PREVIOUS_HEADER = "PREVIOUS INTERNAL NARRATIVE:"

# Fixed presentation order keeps fixtures byte-stable.
THREAD_SECTIONS = (
    ("Goal Thread", "goal"),
    ("Reasoning Thread", "reasoning"),
    ("Memory Thread", "memory"),
)


class ConsolidationError(Exception):
    """Narrative regeneration failed; the previous narrative stays in force."""


def format_threads(threads: MonologueThreads) -> str:
    """Render the three streams as '=== <name> ===' sections in fixed order."""
    sections = [
        f"=== {name} ===\n{getattr(threads, attr)}" for name, attr in THREAD_SECTIONS
    ]
    return "\n\n".join(sections)


def synthesis_input(streams_block: str, previous: InternalNarrative | None) -> str:
    previous_text = previous.text if previous is not None else ""
    return f"{STREAMS_HEADER}\n{streams_block}\n\n{PREVIOUS_HEADER}\n{previous_text}"


class CognitiveController:
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
        self.system_prompt = load_prompt("controller")

    def consolidate(
        self,
        threads: MonologueThreads,
        previous: InternalNarrative | None,
    ) -> InternalNarrative:
        """Regenerate the narrative from the latest threads + prior narrative."""
        return self.consolidate_block(
            format_threads(threads), previous, turn_index=threads.turn_index
        )

    def consolidate_block(
        self,
        streams_block: str,
        previous: InternalNarrative | None,
        turn_index: int,
    ) -> InternalNarrative:
        """Lower-level entry point taking a pre-formatted streams block.

        The threads-bypass ablation feeds a conversation digest through here
        instead of formatted thought streams.
        """
        request = GenerationRequest(
            model_id=self.model_id,
            system_prompt=self.system_prompt,
            messages=(
                Message(
                    role="user",
                    content=synthesis_input(streams_block, previous),
                    turn_index=turn_index,
                ),
            ),
            temperature=self.temperature,
            max_tokens=self.max_tokens,
            component="controller",
            turn_index=turn_index,
        )
        try:
            result = self.backend.generate(request)
        except BackendError as exc:
            raise ConsolidationError(f"{exc.kind}: {exc.detail}") from exc
        if not result.content.strip():
            raise ConsolidationError("controller returned empty narrative")
        return InternalNarrative(
            text=result.content, produced_at_turn=turn_index, stale=False
        )
