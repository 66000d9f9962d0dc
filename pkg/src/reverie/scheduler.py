"""Asynchronous reflection scheduling: the slow half of the fast/slow split.

Each session gets one serial background lane; lanes across sessions run in
parallel up to the worker cap. A backlogged lane coalesces pending work into
a single job covering the latest turn: the narrative is reconstructive, so
the latest regeneration subsumes any skipped intermediate ones.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

JOB_STATUSES = ("queued", "running", "done", "failed")


@dataclass
class ReflectionJob:
    session_id: str
    turn_index: int
    status: str = "queued"
    enqueued_at: float = 0.0
    started_at: Optional[float] = None
    finished_at: Optional[float] = None
    coalesced_turns: list[int] = field(default_factory=list)
    error: Optional[str] = None


@dataclass
class QueueStats:
    length_histogram: dict[int, int]
    active_fraction: float
    mean_length: float
    max_length: int

    @property
    def observed_turns(self) -> int:
        return sum(self.length_histogram.values())


class _Lane:
    def __init__(self):
        self.pending: Optional[ReflectionJob] = None
        self.running: Optional[ReflectionJob] = None
        self.idle = threading.Event()
        self.idle.set()


class ReflectionScheduler:
    """Per-session serialized background job runner with queue monitoring."""

    def __init__(self, worker_cap: int = 8, queue_bound: int = 4):
        self.worker_cap = worker_cap
        self.queue_bound = queue_bound
        self._runners: dict[str, Callable[[int], None]] = {}
        self._lanes: dict[str, _Lane] = {}
        self._lock = threading.Lock()
        self._worker_slots = threading.BoundedSemaphore(worker_cap)
        self._samples: list[int] = []
        self.jobs: list[ReflectionJob] = []
        self._shutdown = False

    def register(self, session_id: str, runner: Callable[[int], None]) -> None:
        with self._lock:
            self._runners[session_id] = runner
            self._lanes.setdefault(session_id, _Lane())

    def on_response_delivered(self, session_id: str, turn_index: int) -> ReflectionJob:
        """Enqueue a reflection job for the turn; never blocks the caller.

        The queue length observed just before enqueueing is recorded as this
        turn's sample, matching measurement at turn-arrival time.
        """
        with self._lock:
            if self._shutdown:
                raise RuntimeError("scheduler is shut down")
            lane = self._lanes.get(session_id)
            if lane is None or session_id not in self._runners:
                raise KeyError(f"unregistered session: {session_id}")
            length = (1 if lane.pending else 0) + (1 if lane.running else 0)
            self._samples.append(length)
            if lane.pending is not None:
                # Coalesce: the pending (not yet started) job is retargeted at
                # the latest turn instead of queueing a second one.
                lane.pending.coalesced_turns.append(lane.pending.turn_index)
                lane.pending.turn_index = turn_index
                lane.pending.enqueued_at = time.monotonic()
                return lane.pending
            job = ReflectionJob(
                session_id=session_id,
                turn_index=turn_index,
                enqueued_at=time.monotonic(),
            )
            self.jobs.append(job)
            lane.pending = job
            lane.idle.clear()
            if lane.running is None:
                threading.Thread(
                    target=self._lane_loop, args=(session_id,), daemon=True
                ).start()
            return job

    def _lane_loop(self, session_id: str) -> None:
        lane = self._lanes[session_id]
        runner = self._runners[session_id]
        while True:
            with self._lock:
                job = lane.pending
                if job is None:
                    lane.running = None
                    lane.idle.set()
                    return
                lane.pending = None
                lane.running = job
                job.status = "running"
                job.started_at = time.monotonic()
            with self._worker_slots:
                try:
                    runner(job.turn_index)
                except Exception as exc:
                    job.status = "failed"
                    job.error = str(exc)
                else:
                    job.status = "done"
                finally:
                    job.finished_at = time.monotonic()
            with self._lock:
                lane.running = None
                if lane.pending is None:
                    lane.idle.set()
                    return

    def drain(self, session_id: str, timeout: Optional[float] = None) -> bool:
        """Block until the session's lane is idle. Returns False on timeout."""
        lane = self._lanes.get(session_id)
        if lane is None:
            return True
        return lane.idle.wait(timeout)

    def drain_all(self, timeout: Optional[float] = None) -> bool:
        deadline = None if timeout is None else time.monotonic() + timeout
        for session_id in list(self._lanes):
            remaining = None if deadline is None else max(0.0, deadline - time.monotonic())
            if not self.drain(session_id, remaining):
                return False
        return True

    def snapshot_queue_stats(self) -> QueueStats:
        with self._lock:
            samples = list(self._samples)
        histogram: dict[int, int] = {}
        for length in samples:
            histogram[length] = histogram.get(length, 0) + 1
        n = len(samples)
        return QueueStats(
            length_histogram=histogram,
            active_fraction=(sum(1 for s in samples if s > 0) / n) if n else 0.0,
            mean_length=(sum(samples) / n) if n else 0.0,
            max_length=max(samples, default=0),
        )

    def shutdown(self, wait: bool = True, timeout: Optional[float] = None) -> None:
        with self._lock:
            self._shutdown = True
        if wait:
            self.drain_all(timeout)
