"""Human-conversation latency simulation.

Models the timing of realistic multi-turn exchanges: jittered typing and
reading speeds, a small cognitive pause before each message, and the agent's
response time, on a virtual clock by default so desk-scale batches finish in
seconds. Background reflection occupies a virtual interval after each
response; queue occupancy is sampled when the next message is submitted.

Accounting convention: typing is counted for every turn, reading for every
turn except the last (the conversation ends with the final reply unread
time-wise).
"""

from __future__ import annotations

import csv
import io
import json
import random
import statistics
import time
from dataclasses import dataclass, field
from typing import Any, Optional

from .scenarios import ScenarioScript
from .scheduler import QueueStats
from .session import AgentSession

DEFAULT_REFLECTION_S = 1.5


@dataclass(frozen=True)
class HumanTimingModel:
    typing_wpm: float = 40.0
    typing_jitter: float = 0.20
    reading_wpm: float = 250.0
    reading_jitter: float = 0.15
    cognitive_delay_s: tuple[float, float] = (1.0, 2.0)
    rng_seed: int = 0

    def __post_init__(self):
        if self.typing_wpm <= 0 or self.reading_wpm <= 0:
            raise ValueError("words-per-minute rates must be positive")
        for jitter in (self.typing_jitter, self.reading_jitter):
            if not 0 <= jitter < 1:
                raise ValueError("jitter fraction must be in [0, 1)")
        lo, hi = self.cognitive_delay_s
        if lo < 0 or hi < lo:
            raise ValueError("cognitive_delay_s must be a non-negative interval")

    def sampler(self) -> "TimingSampler":
        return TimingSampler(self)


def word_count(text: str) -> int:
    return len(text.split())


class TimingSampler:
    """Seeded sampler; jitter is a uniform multiplier on the WPM rate."""

    def __init__(self, model: HumanTimingModel):
        self.model = model
        self.rng = random.Random(model.rng_seed)

    def _rate(self, wpm: float, jitter: float) -> float:
        return wpm * self.rng.uniform(1 - jitter, 1 + jitter)

    def typing_s(self, text: str) -> float:
        return word_count(text) / (self._rate(self.model.typing_wpm, self.model.typing_jitter) / 60)

    def reading_s(self, text: str) -> float:
        return word_count(text) / (self._rate(self.model.reading_wpm, self.model.reading_jitter) / 60)

    def cognitive_s(self) -> float:
        lo, hi = self.model.cognitive_delay_s
        return self.rng.uniform(lo, hi)


@dataclass
class TurnRecord:
    turn_type: str
    typing_s: float
    cognitive_s: float
    response_s: float
    reading_s: float
    queue_len_at_submit: int
    failed: bool = False


@dataclass
class SimReport:
    turns: list[TurnRecord] = field(default_factory=list)

    def response_stats(self) -> dict[str, float]:
        times = [t.response_s for t in self.turns if not t.failed]
        if not times:
            return {"mean": 0.0, "median": 0.0, "min": 0.0, "max": 0.0, "stddev": 0.0}
        return {
            "mean": statistics.fmean(times),
            "median": statistics.median(times),
            "min": min(times),
            "max": max(times),
            "stddev": statistics.stdev(times) if len(times) > 1 else 0.0,
        }

    def time_breakdown(self) -> dict[str, float]:
        typing = sum(t.typing_s for t in self.turns)
        reading = sum(t.reading_s for t in self.turns)
        cognitive = sum(t.cognitive_s for t in self.turns)
        agent = sum(t.response_s for t in self.turns)
        human = typing + reading + cognitive
        total = human + agent
        pct = (lambda x: 100.0 * x / total) if total else (lambda x: 0.0)
        return {
            "typing_s": typing,
            "reading_s": reading,
            "cognitive_s": cognitive,
            "human_s": human,
            "agent_s": agent,
            "total_s": total,
            "human_pct": pct(human),
            "agent_pct": pct(agent),
        }

    def turn_type_stats(self) -> dict[str, dict[str, float]]:
        by_type: dict[str, list[TurnRecord]] = {}
        for t in self.turns:
            by_type.setdefault(t.turn_type, []).append(t)
        return {
            turn_type: {
                "count": len(records),
                "avg_typing_s": statistics.fmean(r.typing_s for r in records),
                "avg_reading_s": statistics.fmean(r.reading_s for r in records),
                "avg_response_s": statistics.fmean(r.response_s for r in records),
            }
            for turn_type, records in by_type.items()
        }

    def queue_stats(self) -> QueueStats:
        samples = [t.queue_len_at_submit for t in self.turns]
        histogram: dict[int, int] = {}
        for s in samples:
            histogram[s] = histogram.get(s, 0) + 1
        n = len(samples)
        return QueueStats(
            length_histogram=histogram,
            active_fraction=(sum(1 for s in samples if s > 0) / n) if n else 0.0,
            mean_length=(sum(samples) / n) if n else 0.0,
            max_length=max(samples, default=0),
        )

    def to_dict(self) -> dict[str, Any]:
        queue = self.queue_stats()
        return {
            "turns": [vars(t) for t in self.turns],
            "response_stats": self.response_stats(),
            "time_breakdown": self.time_breakdown(),
            "turn_type_stats": self.turn_type_stats(),
            "queue": {
                "length_histogram": queue.length_histogram,
                "active_fraction": queue.active_fraction,
                "mean_length": queue.mean_length,
                "max_length": queue.max_length,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(
            ["turn_type", "typing_s", "cognitive_s", "response_s", "reading_s",
             "queue_len_at_submit", "failed"]
        )
        for t in self.turns:
            writer.writerow(
                [t.turn_type, f"{t.typing_s:.3f}", f"{t.cognitive_s:.3f}",
                 f"{t.response_s:.3f}", f"{t.reading_s:.3f}", t.queue_len_at_submit,
                 int(t.failed)]
            )
        return buf.getvalue()


def resolve_agent_delay(agent_delays, turn_index: int, turn_type: str) -> Optional[float]:
    if agent_delays is None:
        return None
    if isinstance(agent_delays, dict):
        return agent_delays.get(turn_type)
    return agent_delays[turn_index % len(agent_delays)]


def simulate_conversation(
    script: ScenarioScript,
    timing: HumanTimingModel | TimingSampler,
    session: AgentSession,
    agent_delays: Optional[dict | list] = None,
    reflection_delay_s: float = DEFAULT_REFLECTION_S,
    realtime: bool = False,
) -> SimReport:
    """Play one scenario through a session on a virtual clock.

    agent_delays scripts the per-turn response time on the virtual clock
    (dict keyed by turn_type or list per turn); when absent, measured wall
    time is used. In realtime mode the human delays are actually slept.
    """
    sampler = timing.sampler() if isinstance(timing, HumanTimingModel) else timing
    report = SimReport()
    clock = 0.0
    reflection_ends: list[float] = []
    last = len(script.turns) - 1
    for i, turn in enumerate(script.turns):
        typing_s = sampler.typing_s(turn.user_text)
        cognitive_s = sampler.cognitive_s()
        if realtime:
            time.sleep(typing_s + cognitive_s)
        clock += typing_s + cognitive_s
        submit_t = clock
        queue_len = sum(1 for end in reflection_ends if end > submit_t)

        failed = False
        start = time.monotonic()
        try:
            trace = session.post_message(turn.user_text)
            reply = trace["reply"]
        except Exception:
            failed = True
            reply = ""
        wall_s = time.monotonic() - start
        scripted = resolve_agent_delay(agent_delays, i, turn.turn_type)
        response_s = wall_s if scripted is None else scripted
        clock += response_s
        if not failed:
            reflection_ends.append(clock + reflection_delay_s)

        reading_s = sampler.reading_s(reply) if (i < last and not failed) else 0.0
        if realtime:
            time.sleep(reading_s)
        clock += reading_s
        report.turns.append(
            TurnRecord(
                turn_type=turn.turn_type,
                typing_s=typing_s,
                cognitive_s=cognitive_s,
                response_s=response_s,
                reading_s=reading_s,
                queue_len_at_submit=queue_len,
                failed=failed,
            )
        )
    session.drain(timeout=30)
    return report


def aggregate_reports(reports: list[SimReport]) -> SimReport:
    if not reports:
        raise ValueError("aggregate_reports requires at least one report")
    pooled = SimReport()
    for report in reports:
        pooled.turns.extend(report.turns)
    return pooled


def render_tables(report: SimReport) -> str:
    """Render the time-allocation and turn-type timing summary tables."""
    breakdown = report.time_breakdown()
    stats = report.response_stats()
    lines = [
        "Time allocation",
        "---------------",
        f"{'Component':<26}{'Total time':>12}  {'Share':>7}",
        f"{'Human typing':<26}{breakdown['typing_s']:>11.1f}s {100*breakdown['typing_s']/breakdown['total_s'] if breakdown['total_s'] else 0:>6.1f}%",
        f"{'Human reading':<26}{breakdown['reading_s']:>11.1f}s {100*breakdown['reading_s']/breakdown['total_s'] if breakdown['total_s'] else 0:>6.1f}%",
        f"{'Human cognitive pause':<26}{breakdown['cognitive_s']:>11.1f}s {100*breakdown['cognitive_s']/breakdown['total_s'] if breakdown['total_s'] else 0:>6.1f}%",
        f"{'Total human time':<26}{breakdown['human_s']:>11.1f}s {breakdown['human_pct']:>6.1f}%",
        f"{'Agent response time':<26}{breakdown['agent_s']:>11.1f}s {breakdown['agent_pct']:>6.1f}%",
        f"{'Total conversation time':<26}{breakdown['total_s']:>11.1f}s  100.0%",
        "",
        "Response time statistics",
        "------------------------",
        f"mean {stats['mean']:.2f}s  median {stats['median']:.2f}s  min {stats['min']:.2f}s  "
        f"max {stats['max']:.2f}s  stddev {stats['stddev']:.2f}s",
        "",
        "Timing by turn type",
        "-------------------",
        f"{'Turn type':<16}{'Avg typing':>12}{'Avg reading':>13}{'Avg response':>14}",
    ]
    for turn_type, row in report.turn_type_stats().items():
        lines.append(
            f"{turn_type:<16}{row['avg_typing_s']:>11.2f}s{row['avg_reading_s']:>12.2f}s"
            f"{row['avg_response_s']:>13.2f}s"
        )
    queue = report.queue_stats()
    lines += [
        "",
        "Background queue",
        "----------------",
        f"length distribution {queue.length_histogram}  mean {queue.mean_length:.3f}  "
        f"max {queue.max_length}  active fraction {queue.active_fraction:.1%}",
    ]
    return "\n".join(lines)
