import json

import httpx
import pytest

from reverie.gateway import (
    BackendError,
    GenerationRequest,
    LiveBackend,
    PlanEntry,
    RetryingBackend,
    ScriptedBackend,
    script_backend,
)
from reverie.state import Message


def request_for(component="talker", turn=0, content="hi"):
    return GenerationRequest(
        model_id="test-model",
        system_prompt="sys",
        messages=(Message(role="user", content=content, turn_index=turn),),
        component=component,
        turn_index=turn,
    )


class TestGenerationRequest:
    def test_defaults_match_production_parameters(self):
        req = request_for()
        assert req.temperature == 0.7
        assert req.max_tokens == 3_000

    def test_temperature_bounds(self):
        with pytest.raises(ValueError):
            GenerationRequest(
                model_id="m", system_prompt="", messages=(), temperature=2.5
            )

    def test_max_tokens_floor(self):
        with pytest.raises(ValueError):
            GenerationRequest(model_id="m", system_prompt="", messages=(), max_tokens=0)


class TestBackendError:
    @pytest.mark.parametrize("kind", ["timeout", "rate_limited", "transport"])
    def test_retryable_kinds(self, kind):
        assert BackendError(kind, "x").retryable

    def test_malformed_not_retryable(self):
        assert not BackendError("malformed_response", "x").retryable

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            BackendError("cosmic_ray", "x")


class TestScriptedBackend:
    def test_fixture_lookup_in_order(self):
        plan = [
            PlanEntry(component="talker", turn_index=t, response=f"reply {t}", latency_ms=5)
            for t in range(5)
        ]
        backend = script_backend(plan)
        for t in range(5):
            result = backend.generate(request_for(turn=t))
            assert result.content == f"reply {t}"
            assert result.latency_ms == 5

    def test_unmatched_key_is_malformed_response(self):
        backend = script_backend([PlanEntry(component="talker", turn_index=0, response="x")])
        with pytest.raises(BackendError) as err:
            backend.generate(request_for(turn=9))
        assert err.value.kind == "malformed_response"
        assert "turn=9" in err.value.detail

    def test_scripted_failure_then_success_on_retry(self):
        plan = [
            PlanEntry(component="manager", turn_index=2, error_kind="timeout"),
            PlanEntry(component="manager", turn_index=2, response="ok after retry"),
        ]
        backend = RetryingBackend(script_backend(plan), max_retries=2, sleep=lambda s: None)
        result = backend.generate(request_for(component="manager", turn=2))
        assert result.content == "ok after retry"
        # Exactly as many attempts as the plan scripts: one failure + one success.
        assert len(backend.inner.calls) == 2

    def test_malformed_response_never_retried(self):
        plan = [
            PlanEntry(component="manager", turn_index=0, error_kind="malformed_response"),
            PlanEntry(component="manager", turn_index=0, response="unreachable"),
        ]
        backend = RetryingBackend(script_backend(plan), max_retries=3, sleep=lambda s: None)
        with pytest.raises(BackendError) as err:
            backend.generate(request_for(component="manager", turn=0))
        assert err.value.kind == "malformed_response"
        assert len(backend.inner.calls) == 1

    def test_retries_bounded(self):
        plan = [
            PlanEntry(component="talker", turn_index=0, error_kind="rate_limited")
            for _ in range(5)
        ]
        backend = RetryingBackend(script_backend(plan), max_retries=2, sleep=lambda s: None)
        with pytest.raises(BackendError):
            backend.generate(request_for())
        assert len(backend.inner.calls) == 3  # initial attempt + 2 retries

    def test_contains_key_disambiguates(self):
        plan = [
            PlanEntry(component="talker", turn_index=0, contains="avalanche", response="A"),
            PlanEntry(component="talker", turn_index=0, response="B"),
        ]
        backend = script_backend(plan)
        assert backend.generate(request_for(content="avalanche trip")).content == "A"
        assert backend.generate(request_for(content="weather")).content == "B"

    def test_duplicate_repeat_keys_rejected(self):
        plan = [
            PlanEntry(component="talker", turn_index=0, response="A", repeat=True),
            PlanEntry(component="talker", turn_index=0, response="B", repeat=True),
        ]
        with pytest.raises(ValueError):
            ScriptedBackend(plan)

    def test_entry_without_payload_rejected(self):
        with pytest.raises(ValueError):
            ScriptedBackend([PlanEntry(component="talker", turn_index=0)])

    def test_plan_file_round_trip(self, tmp_path):
        raw = [
            {"component": "talker", "turn": 0, "response": "hello", "latency_ms": 3},
            {"component": "manager", "turn": 0, "error": {"kind": "timeout"}},
        ]
        path = tmp_path / "plan.json"
        path.write_text(json.dumps(raw))
        backend = ScriptedBackend.from_file(str(path))
        assert backend.generate(request_for()).content == "hello"
        with pytest.raises(BackendError):
            backend.generate(request_for(component="manager"))

    def test_call_log_records_components(self):
        plan = [
            PlanEntry(component="talker", turn_index=0, response="x"),
            PlanEntry(component="manager", turn_index=0, response="y"),
        ]
        backend = script_backend(plan)
        backend.generate(request_for())
        backend.generate(request_for(component="manager"))
        assert backend.call_counts() == {"talker": 1, "manager": 1}


def mock_live_backend(handler):
    return LiveBackend(
        base_url="https://example.test/api/v1",
        api_key="k",
        transport=httpx.MockTransport(handler),
    )


class TestLiveBackend:
    def test_request_body_carries_exact_parameters(self):
        seen = {}

        def handler(request):
            seen["body"] = json.loads(request.content)
            seen["auth"] = request.headers.get("authorization")
            return httpx.Response(
                200, json={"choices": [{"message": {"content": "ok"}}]}
            )

        backend = mock_live_backend(handler)
        result = backend.generate(request_for())
        assert result.content == "ok"
        body = seen["body"]
        assert body["temperature"] == 0.7
        assert body["max_tokens"] == 3_000
        assert body["model"] == "test-model"
        assert body["messages"][0] == {"role": "system", "content": "sys"}
        assert seen["auth"] == "Bearer k"

    def test_rate_limit_maps_to_rate_limited(self):
        backend = mock_live_backend(lambda r: httpx.Response(429, text="slow down"))
        with pytest.raises(BackendError) as err:
            backend.generate(request_for())
        assert err.value.kind == "rate_limited"

    def test_server_error_maps_to_transport(self):
        backend = mock_live_backend(lambda r: httpx.Response(503, text="oops"))
        with pytest.raises(BackendError) as err:
            backend.generate(request_for())
        assert err.value.kind == "transport"

    def test_bad_payload_maps_to_malformed(self):
        backend = mock_live_backend(lambda r: httpx.Response(200, json={"nope": 1}))
        with pytest.raises(BackendError) as err:
            backend.generate(request_for())
        assert err.value.kind == "malformed_response"

    def test_missing_configuration_rejected(self, monkeypatch):
        monkeypatch.delenv("REVERIE_API_URL", raising=False)
        monkeypatch.delenv("REVERIE_API_KEY", raising=False)
        with pytest.raises(ValueError):
            LiveBackend()
