import json
import threading

import pytest

from reverie.gateway import Backend, PlanEntry, ScriptedBackend


def manager_json(turn):
    return json.dumps(
        {
            "reasoning": f"reasoning about turn {turn}",
            "memory": f"remembering turn {turn}",
            "goal": f"goal after turn {turn}",
        }
    )


def full_plan(n_turns, fail=None):
    """Scripted plan for n full-pipeline turns.

    fail: optional (component, turn) whose entry becomes a timeout error.
    """
    plan = []
    for t in range(n_turns):
        for component, response in (
            ("talker", f"assistant reply {t}"),
            ("manager", manager_json(t)),
            ("controller", f"narrative after turn {t}"),
        ):
            if fail == (component, t):
                plan.append(
                    PlanEntry(component=component, turn_index=t, error_kind="timeout")
                )
            else:
                plan.append(PlanEntry(component=component, turn_index=t, response=response))
    return plan


def scripted(plan):
    return ScriptedBackend(plan)


class GateBackend(Backend):
    """Wrapper that blocks calls to selected components until released."""

    def __init__(self, inner, gated_components=("manager",)):
        self.inner = inner
        self.backend_id = inner.backend_id
        self.gated = set(gated_components)
        self.gate = threading.Event()
        self.waiting = threading.Event()

    def generate(self, request):
        if request.component in self.gated and not self.gate.is_set():
            self.waiting.set()
            self.gate.wait(timeout=30)
        return self.inner.generate(request)

    def release(self):
        self.gate.set()


@pytest.fixture
def no_retry_sleep(monkeypatch):
    import reverie.gateway as gw

    monkeypatch.setattr(gw.time, "sleep", lambda s: None)
