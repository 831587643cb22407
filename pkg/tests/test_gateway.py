"""Digest keying, routing, retry policy, record/replay, live wire format."""

import json

import httpx
import pytest
from pydantic import ValidationError

from conftest import FailingBackend, ScriptedBackend
from facet.errors import (
    GatewayTimeoutError,
    ProviderError,
    ReplayMissError,
    RoutingError,
)
from facet.gateway import (
    DEFAULT_ROUTING,
    AgentRole,
    ChatMessage,
    ChatRequest,
    ChatResponse,
    ChatRole,
    Gateway,
    LiveBackend,
    ModelRouting,
    RecordingBackend,
    ReplayBackend,
    RetryPolicy,
    Temperatures,
    complete,
    request_digest,
    route_model,
    write_fixture,
)

FAST_RETRY = RetryPolicy(max_retries=3, timeout_seconds=5.0, backoff_seconds=0.0)


def make_request(content="hi", temperature=0.0, model="gpt-4o"):
    return ChatRequest(
        model_id=model,
        messages=[ChatMessage(role=ChatRole.USER, content=content)],
        temperature=temperature,
        max_tokens=64,
    )


class TestChatRequest:
    def test_empty_messages_rejected(self):
        with pytest.raises(ValidationError):
            ChatRequest(model_id="m", messages=[], max_tokens=10)

    def test_assistant_first_rejected(self):
        with pytest.raises(ValidationError):
            ChatRequest(
                model_id="m",
                messages=[ChatMessage(role=ChatRole.ASSISTANT, content="x")],
                max_tokens=10,
            )

    def test_negative_temperature_rejected(self):
        with pytest.raises(ValidationError):
            make_request(temperature=-0.1)


class TestRequestDigest:
    def test_deterministic(self):
        assert request_digest(make_request()) == request_digest(make_request())

    def test_temperature_included(self):
        assert request_digest(make_request(temperature=0.0)) != request_digest(
            make_request(temperature=0.7)
        )

    def test_all_key_fields_included(self):
        base = make_request()
        assert request_digest(base) != request_digest(make_request(model="other"))
        assert request_digest(base) != request_digest(make_request(content="other"))
        changed_tokens = base.model_copy(update={"max_tokens": 128})
        assert request_digest(base) != request_digest(changed_tokens)


class TestRouting:
    def test_default_routing(self):
        assert route_model(AgentRole.LEARNER, DEFAULT_ROUTING) == "gpt-4.1"
        assert route_model(AgentRole.EVALUATOR, DEFAULT_ROUTING) == "gpt-4o"

    def test_total_over_roles(self):
        for role in AgentRole:
            assert route_model(role, DEFAULT_ROUTING)

    def test_unmapped_role(self):
        partial = ModelRouting(learner="a", teacher="b", evaluator="c")
        with pytest.raises(RoutingError):
            route_model(AgentRole.FORMATTER, partial)


class TestRetryPolicy:
    def test_non_transient_4xx_not_retried(self):
        backend = FailingBackend(lambda: ProviderError(400, "bad request"))
        with pytest.raises(ProviderError):
            complete(make_request(), backend, FAST_RETRY)
        assert backend.call_count == 1

    @pytest.mark.parametrize("status", [429, 500, 503])
    def test_transient_retried_up_to_limit(self, status):
        backend = FailingBackend(lambda: ProviderError(status, "overloaded"))
        with pytest.raises(ProviderError):
            complete(make_request(), backend, FAST_RETRY)
        assert backend.call_count == 1 + FAST_RETRY.max_retries

    def test_timeout_retried(self):
        backend = FailingBackend(lambda: GatewayTimeoutError("slow"))
        with pytest.raises(GatewayTimeoutError):
            complete(make_request(), backend, FAST_RETRY)
        assert backend.call_count == 1 + FAST_RETRY.max_retries

    def test_recovers_after_transient(self):
        calls = {"n": 0}

        class Flaky:
            def send(self, req, timeout):
                calls["n"] += 1
                if calls["n"] < 3:
                    raise ProviderError(500, "boom")
                return ChatResponse(content="ok", model_id=req.model_id)

        resp = complete(make_request(), Flaky(), FAST_RETRY)
        assert resp.content == "ok"
        assert calls["n"] == 3


class TestReplayBackend:
    def test_replay_identity(self, tmp_path):
        req = make_request("fixture me")
        write_fixture(tmp_path, req, "recorded content é")
        backend = ReplayBackend(tmp_path)
        resp = backend.send(req, timeout=1)
        assert resp.content == "recorded content é"

    def test_replay_miss(self, tmp_path):
        backend = ReplayBackend(tmp_path)
        req = make_request("never recorded")
        with pytest.raises(ReplayMissError) as err:
            backend.send(req, timeout=1)
        assert err.value.digest == request_digest(req)

    def test_sequence_consumed_in_order_then_sticks(self, tmp_path):
        req = make_request("repeat")
        write_fixture(tmp_path, req, "first", "second")
        backend = ReplayBackend(tmp_path)
        assert backend.send(req, 1).content == "first"
        assert backend.send(req, 1).content == "second"
        assert backend.send(req, 1).content == "second"

    def test_fresh_instance_restarts_sequence(self, tmp_path):
        req = make_request("repeat")
        write_fixture(tmp_path, req, "first", "second")
        ReplayBackend(tmp_path).send(req, 1)
        assert ReplayBackend(tmp_path).send(req, 1).content == "first"

    def test_no_network_client(self, tmp_path):
        backend = ReplayBackend(tmp_path)
        assert not hasattr(backend, "_client")


class TestRecordingBackend:
    def test_records_fixture(self, tmp_path):
        recorder = RecordingBackend(ScriptedBackend(["canned"]), tmp_path)
        req = make_request("record me")
        recorder.send(req, 1)
        replay = ReplayBackend(tmp_path)
        assert replay.send(req, 1).content == "canned"

    def test_rerecording_appends_sequence(self, tmp_path):
        recorder = RecordingBackend(ScriptedBackend(["one", "two"]), tmp_path)
        req = make_request("again")
        recorder.send(req, 1)
        recorder.send(req, 1)
        data = json.loads((tmp_path / f"{request_digest(req)}.json").read_text())
        assert [r["content"] for r in data["responses"]] == ["one", "two"]


class TestLiveBackend:
    def make_backend(self, handler):
        return LiveBackend(
            base_url="https://llm.example/v1",
            api_key="sk-test",
            transport=httpx.MockTransport(handler),
        )

    def test_parses_openai_response(self):
        def handler(request):
            payload = json.loads(request.content)
            assert request.url.path.endswith("/chat/completions")
            assert payload["model"] == "gpt-4o"
            assert payload["messages"][0] == {"role": "user", "content": "hi"}
            assert request.headers["authorization"] == "Bearer sk-test"
            return httpx.Response(
                200,
                json={
                    "model": "gpt-4o",
                    "choices": [{"message": {"role": "assistant", "content": "hello"}}],
                    "usage": {"prompt_tokens": 3, "completion_tokens": 2, "total_tokens": 5},
                },
            )

        resp = self.make_backend(handler).send(make_request(), timeout=5)
        assert resp.content == "hello"
        assert resp.usage.total_tokens == 5

    def test_http_error_raises_provider_error(self):
        def handler(request):
            return httpx.Response(401, text="bad key")

        with pytest.raises(ProviderError) as err:
            self.make_backend(handler).send(make_request(), timeout=5)
        assert err.value.status == 401
        assert not err.value.transient


class TestRateLimiting:
    def test_generous_bucket_does_not_block(self):
        def handler(request):
            return httpx.Response(
                200, json={"choices": [{"message": {"content": "ok"}}], "model": "m"}
            )

        backend = LiveBackend(
            base_url="https://llm.example/v1",
            rate_per_second=10_000,
            max_in_flight=2,
            transport=httpx.MockTransport(handler),
        )
        for _ in range(5):
            assert backend.send(make_request(), timeout=5).content == "ok"


class TestGateway:
    def test_chat_logs_and_routes(self):
        backend = ScriptedBackend(["reply"])
        gw = Gateway(backend, temperatures=Temperatures(evaluator=0.0))
        resp = gw.chat(AgentRole.EVALUATOR, [ChatMessage(role=ChatRole.USER, content="q")])
        assert resp.content == "reply"
        assert gw.call_count == 1
        req = backend.requests[0]
        assert req.model_id == "gpt-4o"
        assert req.temperature == 0.0

    def test_for_run_isolates_log(self):
        backend = ScriptedBackend(["reply"])
        gw = Gateway(backend)
        view = gw.for_run()
        view.chat(AgentRole.LEARNER, [ChatMessage(role=ChatRole.USER, content="q")])
        assert view.call_count == 1
        assert gw.call_count == 0
        assert view.backend is gw.backend
