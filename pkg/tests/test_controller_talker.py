import pytest

from reverie.controller import (
    CognitiveController,
    ConsolidationError,
    format_threads,
    synthesis_input,
)
from reverie.gateway import BackendError, PlanEntry, script_backend
from reverie.state import ConversationHistory, InternalNarrative, Message, MonologueThreads
from reverie.talker import NARRATIVE_PREFIX, Talker

THREADS = MonologueThreads(reasoning="r", memory="m", goal="g", turn_index=1)


class TestFormatThreads:
    def test_fixed_order_and_header_syntax(self):
        expected = (
            "=== Goal Thread ===\ng\n\n"
            "=== Reasoning Thread ===\nr\n\n"
            "=== Memory Thread ===\nm"
        )
        assert format_threads(THREADS) == expected

    def test_deterministic(self):
        assert format_threads(THREADS) == format_threads(THREADS)

    def test_embedded_separator_passes_through_verbatim(self):
        threads = MonologueThreads(reasoning="a === b", memory="m", goal="g")
        assert "=== Reasoning Thread ===\na === b" in format_threads(threads)


class TestSynthesisInput:
    def test_two_block_template(self):
        prev = InternalNarrative(text="old story", produced_at_turn=0)
        text = synthesis_input("STREAMS", prev)
        assert text == (
            "LATEST INNER MONOLOGUE STREAMS:\nSTREAMS\n\n"
            "PREVIOUS INTERNAL NARRATIVE:\nold story"
        )

    def test_empty_previous_block_is_explicit(self):
        text = synthesis_input("STREAMS", None)
        assert text.endswith("PREVIOUS INTERNAL NARRATIVE:\n")


class TestConsolidate:
    def test_success_replaces_wholesale(self):
        backend = script_backend(
            [PlanEntry(component="controller", turn_index=1, response="new narrative")]
        )
        controller = CognitiveController(backend, "test-model")
        prev = InternalNarrative(text="old narrative", produced_at_turn=0)
        narrative = controller.consolidate(THREADS, prev)
        assert narrative.text == "new narrative"
        assert narrative.produced_at_turn == 1
        assert narrative.stale is False

    def test_request_contains_only_the_two_blocks(self):
        backend = script_backend(
            [PlanEntry(component="controller", turn_index=1, response="n")]
        )
        controller = CognitiveController(backend, "test-model")
        prev = InternalNarrative(text="prior", produced_at_turn=0)
        controller.consolidate(THREADS, prev)
        request = backend.calls[0].request
        assert len(request.messages) == 1
        assert request.messages[0].content == synthesis_input(format_threads(THREADS), prev)

    def test_single_backend_call(self):
        backend = script_backend(
            [PlanEntry(component="controller", turn_index=1, response="n")]
        )
        controller = CognitiveController(backend, "test-model")
        controller.consolidate(THREADS, None)
        assert len(backend.calls) == 1

    def test_backend_failure_raises_consolidation_error(self):
        backend = script_backend(
            [PlanEntry(component="controller", turn_index=1, error_kind="timeout")]
        )
        controller = CognitiveController(backend, "test-model")
        with pytest.raises(ConsolidationError):
            controller.consolidate(THREADS, None)

    def test_empty_completion_rejected(self):
        backend = script_backend(
            [PlanEntry(component="controller", turn_index=1, response="   ")]
        )
        controller = CognitiveController(backend, "test-model")
        with pytest.raises(ConsolidationError):
            controller.consolidate(THREADS, None)


def history_with(messages):
    return ConversationHistory(messages=tuple(messages))


class TestTalker:
    def make(self, response="reply"):
        backend = script_backend(
            [PlanEntry(component="talker", turn_index=0, response=response, latency_ms=7)]
        )
        return Talker(backend, "test-model"), backend

    def test_turn_zero_no_narrative_message(self):
        talker, backend = self.make()
        history = history_with([Message(role="user", content="hi", turn_index=0)])
        result = talker.respond(history, None, turn_index=0)
        assert result.content == "reply"
        request = backend.calls[0].request
        assert all(NARRATIVE_PREFIX not in m.content for m in request.messages)

    def test_narrative_injected_as_single_trailing_system_message(self):
        talker, backend = self.make()
        narrative = InternalNarrative(text="the story so far", produced_at_turn=0)
        history = history_with(
            [
                Message(role="user", content="hi", turn_index=0),
                Message(role="assistant", content="hello", turn_index=0),
                Message(role="user", content="next", turn_index=1),
            ]
        )
        talker.respond(history, narrative, turn_index=0)
        request = backend.calls[0].request
        narrative_msgs = [m for m in request.messages if m.content.startswith(NARRATIVE_PREFIX)]
        assert len(narrative_msgs) == 1
        assert request.messages[-1] is not None
        assert request.messages[-1].content == NARRATIVE_PREFIX + "the story so far"
        assert request.messages[-1].role == "system"

    def test_stale_narrative_still_injected(self):
        talker, backend = self.make()
        narrative = InternalNarrative(text="stale story", produced_at_turn=0, stale=True)
        history = history_with([Message(role="user", content="hi", turn_index=0)])
        talker.respond(history, narrative, turn_index=0)
        assert backend.calls[0].request.messages[-1].content == NARRATIVE_PREFIX + "stale story"

    def test_history_truncated_before_send(self):
        talker, backend = self.make()
        msgs = [Message(role="system", content="sys", turn_index=0)]
        for i in range(40):
            role = "user" if i % 2 == 0 else "assistant"
            msgs.append(Message(role=role, content="x" * 8000, turn_index=i // 2))
        history = ConversationHistory(messages=tuple(msgs), max_tokens=20_000)
        talker.respond(history, None, turn_index=0)
        request = backend.calls[0].request
        sent_tokens = sum(m.tokens for m in request.messages)
        assert sent_tokens <= 20_000

    def test_backend_error_surfaces(self):
        backend = script_backend(
            [PlanEntry(component="talker", turn_index=0, error_kind="transport")]
        )
        talker = Talker(backend, "test-model")
        history = history_with([Message(role="user", content="hi", turn_index=0)])
        with pytest.raises(BackendError):
            talker.respond(history, None, turn_index=0)
