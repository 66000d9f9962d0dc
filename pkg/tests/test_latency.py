import pytest

from reverie.gateway import SyntheticBackend
from reverie.latency import (
    HumanTimingModel,
    SimReport,
    TurnRecord,
    aggregate_reports,
    render_tables,
    simulate_conversation,
    word_count,
)
from reverie.scenarios import synthetic_scenario
from reverie.session import AgentConfig, AgentSession

REFERENCE_DELAYS = {"introduction": 2.32, "distractor": 2.35, "critical": 3.27}


def make_session():
    return AgentSession(SyntheticBackend(), AgentConfig(retries=0))


def zero_jitter(seed=0):
    return HumanTimingModel(
        typing_jitter=0.0, reading_jitter=0.0, cognitive_delay_s=(0.0, 0.0), rng_seed=seed
    )


class TestTimingModel:
    def test_defaults(self):
        model = HumanTimingModel()
        assert model.typing_wpm == 40.0
        assert model.reading_wpm == 250.0
        assert model.cognitive_delay_s == (1.0, 2.0)

    def test_invalid_wpm(self):
        with pytest.raises(ValueError):
            HumanTimingModel(typing_wpm=0)

    def test_invalid_jitter(self):
        with pytest.raises(ValueError):
            HumanTimingModel(reading_jitter=1.0)

    def test_zero_jitter_exact_arithmetic(self):
        sampler = zero_jitter().sampler()
        text = " ".join(["word"] * 20)
        # 20 words at 40 WPM = 30 seconds.
        assert sampler.typing_s(text) == pytest.approx(30.0)
        # 20 words at 250 WPM = 4.8 seconds.
        assert sampler.reading_s(text) == pytest.approx(4.8)

    def test_jitter_bounded(self):
        sampler = HumanTimingModel(rng_seed=1).sampler()
        text = " ".join(["word"] * 40)
        base = 40 / (40 / 60)
        for _ in range(200):
            t = sampler.typing_s(text)
            assert base / 1.2 <= t <= base / 0.8

    def test_seeded_reproducibility(self):
        a = HumanTimingModel(rng_seed=42).sampler()
        b = HumanTimingModel(rng_seed=42).sampler()
        text = "some words to type here"
        assert [a.typing_s(text) for _ in range(5)] == [b.typing_s(text) for _ in range(5)]


class TestSimulateConversation:
    def test_seeded_determinism(self):
        script = synthetic_scenario(0)
        runs = []
        for _ in range(2):
            report = simulate_conversation(
                script,
                HumanTimingModel(rng_seed=42),
                make_session(),
                agent_delays=REFERENCE_DELAYS,
            )
            runs.append(report.to_json())
        assert runs[0] == runs[1]

    def test_turn_structure_recorded(self):
        report = simulate_conversation(
            synthetic_scenario(0), zero_jitter(), make_session(), agent_delays=REFERENCE_DELAYS
        )
        types = [t.turn_type for t in report.turns]
        assert types == ["introduction", "distractor", "distractor", "distractor", "critical"]
        # No reading counted after the final exchange.
        assert report.turns[-1].reading_s == 0.0

    def test_component_times_sum_to_total(self):
        report = simulate_conversation(
            synthetic_scenario(1), HumanTimingModel(rng_seed=3), make_session(),
            agent_delays=REFERENCE_DELAYS,
        )
        b = report.time_breakdown()
        assert b["total_s"] == pytest.approx(b["human_s"] + b["agent_s"])
        assert b["human_pct"] + b["agent_pct"] == pytest.approx(100.0)

    def test_failed_turn_recorded_and_simulation_continues(self):
        from reverie.gateway import PlanEntry, ScriptedBackend
        from conftest import full_plan

        # A failed turn is rolled back, so the retried turn index repeats:
        # one scripted failure entry precedes the successful turn-2 entries.
        plan = [PlanEntry(component="talker", turn_index=2, error_kind="transport")]
        plan += full_plan(4)
        session = AgentSession(ScriptedBackend(plan), AgentConfig(retries=0))
        report = simulate_conversation(
            synthetic_scenario(0), zero_jitter(), session, agent_delays=REFERENCE_DELAYS
        )
        assert [t.failed for t in report.turns] == [False, False, True, False, False]
        assert session.turn == 4

    def test_forced_congestion_fills_queue(self):
        # Reflections last far longer than the inter-turn human time, so
        # every later submission sees active background work.
        model = HumanTimingModel(
            typing_wpm=4000, reading_wpm=4000, typing_jitter=0, reading_jitter=0,
            cognitive_delay_s=(0.0, 0.0), rng_seed=0,
        )
        report = simulate_conversation(
            synthetic_scenario(0), model, make_session(),
            agent_delays={"introduction": 0.0, "distractor": 0.0, "critical": 0.0},
            reflection_delay_s=1000.0,
        )
        queue = report.queue_stats()
        # First submission sees an empty queue; all 4 later ones see backlog.
        assert queue.active_fraction == pytest.approx(0.8)
        assert queue.max_length >= 1


class TestAggregation:
    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            aggregate_reports([])

    def test_single_report_pass_through(self):
        report = simulate_conversation(
            synthetic_scenario(0), zero_jitter(), make_session(), agent_delays=REFERENCE_DELAYS
        )
        pooled = aggregate_reports([report])
        assert pooled.response_stats() == report.response_stats()

    def test_pooled_count_is_sum(self):
        reports = [
            simulate_conversation(
                synthetic_scenario(i), zero_jitter(i), make_session(), agent_delays=REFERENCE_DELAYS
            )
            for i in range(3)
        ]
        pooled = aggregate_reports(reports)
        assert len(pooled.turns) == sum(len(r.turns) for r in reports)

    def test_multiset_aggregates_oracle(self):
        # Oracle: direct computation over a constructed multiset of delays.
        turns = [
            TurnRecord("distractor", 1.0, 0.0, 2.0, 1.0, 0) for _ in range(399)
        ] + [TurnRecord("critical", 1.0, 0.0, 13.24, 0.0, 0)]
        report = SimReport(turns=turns)
        stats = report.response_stats()
        assert stats["max"] == 13.24
        assert stats["median"] == 2.0
        assert stats["min"] == 2.0


class TestRendering:
    def test_tables_render(self):
        report = simulate_conversation(
            synthetic_scenario(0), zero_jitter(), make_session(), agent_delays=REFERENCE_DELAYS
        )
        text = render_tables(report)
        assert "Time allocation" in text
        assert "Timing by turn type" in text
        assert "critical" in text

    def test_csv_has_row_per_turn(self):
        report = simulate_conversation(
            synthetic_scenario(0), zero_jitter(), make_session(), agent_delays=REFERENCE_DELAYS
        )
        lines = report.to_csv().strip().splitlines()
        assert len(lines) == 1 + len(report.turns)


def test_word_count_is_whitespace_delimited():
    assert word_count("one two   three\nfour") == 4
    assert word_count("") == 0
