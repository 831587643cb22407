"""Provider-agnostic chat-completion client with record/replay.

Speaks the OpenAI-compatible chat-completions wire format to any configured
endpoint. The replay backend serves recorded responses keyed by a
content digest of the request and never touches the network, which makes
whole pipeline runs bit-reproducible in tests and offline use.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Optional, Protocol

import httpx
from pydantic import Field, field_validator

from .errors import (
    GatewayTimeoutError,
    ProviderError,
    ReplayMissError,
    RoutingError,
)
from .model import FacetModel


class ChatRole(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


class ChatMessage(FacetModel):
    role: ChatRole
    content: str


class ChatRequest(FacetModel):
    model_id: str
    messages: list[ChatMessage]
    temperature: float = 0.0
    max_tokens: int = 1024

    @field_validator("messages")
    @classmethod
    def _messages_shape(cls, v: list[ChatMessage]) -> list[ChatMessage]:
        if not v:
            raise ValueError("messages must be non-empty")
        if v[0].role is ChatRole.ASSISTANT:
            raise ValueError("first message must have role system or user")
        return v

    @field_validator("temperature")
    @classmethod
    def _temperature_non_negative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("temperature must be >= 0")
        return v


class Usage(FacetModel):
    prompt_tokens: int = 0
    completion_tokens: int = 0
    total_tokens: int = 0


class ChatResponse(FacetModel):
    content: str
    model_id: str
    usage: Usage = Field(default_factory=Usage)
    latency_ms: int = 0


class AgentRole(str, Enum):
    LEARNER = "learner"
    TEACHER = "teacher"
    EVALUATOR = "evaluator"
    FORMATTER = "formatter"


class ModelRouting(FacetModel):
    """Per-role model ids; a role left unmapped raises at routing time."""

    learner: Optional[str] = None
    teacher: Optional[str] = None
    evaluator: Optional[str] = None
    formatter: Optional[str] = None


DEFAULT_ROUTING = ModelRouting(
    learner="gpt-4.1",
    teacher="gpt-4.1",
    evaluator="gpt-4o",
    formatter="gpt-4o",
)


class Temperatures(FacetModel):
    learner: float = 0.7
    teacher: float = 0.7
    evaluator: float = 0.0
    formatter: float = 0.0

    def for_role(self, role: AgentRole) -> float:
        return getattr(self, role.value)


def route_model(role: AgentRole, routing: ModelRouting) -> str:
    model_id = getattr(routing, role.value, None)
    if not model_id:
        raise RoutingError(f"no model mapped for role {role.value}")
    return model_id


def request_digest(req: ChatRequest) -> str:
    """Deterministic content hash over modelId, messages, temperature and
    maxTokens; stable across processes and platforms."""
    payload = json.dumps(
        req.model_dump(by_alias=True, mode="json"),
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Backend(Protocol):
    def send(self, req: ChatRequest, timeout: float) -> ChatResponse: ...


class RetryPolicy(FacetModel):
    max_retries: int = 3
    timeout_seconds: float = 30.0
    backoff_seconds: float = 0.5


def complete(req: ChatRequest, backend: Backend, retry: RetryPolicy | None = None) -> ChatResponse:
    """Send a request, retrying transient failures (timeouts, 429, 5xx) with
    exponential backoff. Total wall time across attempts stays within the
    policy timeout; other 4xx errors are raised immediately."""
    retry = retry or RetryPolicy()
    deadline = time.monotonic() + retry.timeout_seconds
    attempt = 0
    while True:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise GatewayTimeoutError(
                f"request exceeded {retry.timeout_seconds}s wall-time budget"
            )
        try:
            return backend.send(req, timeout=remaining)
        except (ProviderError, GatewayTimeoutError) as exc:
            transient = isinstance(exc, GatewayTimeoutError) or exc.transient
            if not transient or attempt >= retry.max_retries:
                raise
            attempt += 1
            pause = min(retry.backoff_seconds * 2 ** (attempt - 1), max(deadline - time.monotonic(), 0))
            if pause > 0:
                time.sleep(pause)


# --- backends ------------------------------------------------------------------


class _TokenBucket:
    """Minimal thread-safe rate limiter (requests per second)."""

    def __init__(self, rate_per_second: float):
        self.rate = rate_per_second
        self.capacity = max(rate_per_second, 1.0)
        self.tokens = self.capacity
        self.updated = time.monotonic()
        self.lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self.lock:
                now = time.monotonic()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1:
                    self.tokens -= 1
                    return
                wait = (1 - self.tokens) / self.rate
            time.sleep(wait)


class LiveBackend:
    """Talks to an OpenAI-compatible /chat/completions endpoint."""

    def __init__(
        self,
        base_url: str,
        api_key: str = "",
        max_in_flight: int = 8,
        rate_per_second: float | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(headers=headers, transport=transport)
        self._gate = threading.Semaphore(max_in_flight)
        self._bucket = _TokenBucket(rate_per_second) if rate_per_second else None

    def send(self, req: ChatRequest, timeout: float) -> ChatResponse:
        if self._bucket:
            self._bucket.acquire()
        payload = {
            "model": req.model_id,
            "messages": [{"role": m.role.value, "content": m.content} for m in req.messages],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        started = time.monotonic()
        with self._gate:
            try:
                resp = self._client.post(
                    f"{self.base_url}/chat/completions", json=payload, timeout=timeout
                )
            except httpx.TimeoutException as exc:
                raise GatewayTimeoutError(str(exc)) from exc
            except httpx.HTTPError as exc:
                raise ProviderError(status=503, body=str(exc)) from exc
        if resp.status_code != 200:
            raise ProviderError(status=resp.status_code, body=resp.text)
        data = resp.json()
        usage = data.get("usage") or {}
        return ChatResponse(
            content=data["choices"][0]["message"]["content"],
            model_id=data.get("model", req.model_id),
            usage=Usage(
                prompt_tokens=usage.get("prompt_tokens", 0),
                completion_tokens=usage.get("completion_tokens", 0),
                total_tokens=usage.get("total_tokens", 0),
            ),
            latency_ms=int((time.monotonic() - started) * 1000),
        )

    def close(self) -> None:
        self._client.close()


class ReplayBackend:
    """Serves recorded responses from a directory of fixture files.

    Each fixture is ``<digest>.json`` holding the request plus either a
    single response or a response sequence. Sequences exist for stochastic
    endpoints: repeated identical requests consume the recorded responses in
    order and stick on the last one once exhausted. A fresh backend instance
    always starts at the head, so independent runs stay reproducible.
    Performs no network activity.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self._cursors: dict[str, int] = {}
        self._lock = threading.Lock()

    def send(self, req: ChatRequest, timeout: float) -> ChatResponse:
        digest = request_digest(req)
        path = self.directory / f"{digest}.json"
        if not path.exists():
            raise ReplayMissError(digest)
        record = json.loads(path.read_text(encoding="utf-8"))
        responses = record.get("responses") or [record["response"]]
        with self._lock:
            cursor = self._cursors.get(digest, 0)
            self._cursors[digest] = cursor + 1
        picked = responses[min(cursor, len(responses) - 1)]
        return ChatResponse.model_validate(picked)


class RecordingBackend:
    """Delegates to a live backend and freezes every exchange to disk.

    Re-recording an identical request appends to the fixture's response
    sequence, preserving the order responses were observed in.
    """

    def __init__(self, inner: Backend, directory: str | Path):
        self.inner = inner
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def send(self, req: ChatRequest, timeout: float) -> ChatResponse:
        resp = self.inner.send(req, timeout)
        digest = request_digest(req)
        path = self.directory / f"{digest}.json"
        with self._lock:
            if path.exists():
                record = json.loads(path.read_text(encoding="utf-8"))
                responses = record.get("responses") or [record["response"]]
            else:
                record = {"request": req.model_dump(by_alias=True, mode="json")}
                responses = []
            responses.append(resp.model_dump(by_alias=True, mode="json"))
            record["responses"] = responses
            record["recordedAt"] = datetime.now(timezone.utc).isoformat()
            record.pop("response", None)
            path.write_text(
                json.dumps(record, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
                encoding="utf-8",
            )
        return resp


def write_fixture(
    directory: str | Path, req: ChatRequest, *responses: ChatResponse | str
) -> str:
    """Store canned responses for a request; returns the digest key."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    digest = request_digest(req)
    normalized = [
        r.model_dump(by_alias=True, mode="json")
        if isinstance(r, ChatResponse)
        else ChatResponse(content=r, model_id=req.model_id).model_dump(by_alias=True, mode="json")
        for r in responses
    ]
    record = {
        "request": req.model_dump(by_alias=True, mode="json"),
        "responses": normalized,
        "recordedAt": datetime.now(timezone.utc).isoformat(),
    }
    (directory / f"{digest}.json").write_text(
        json.dumps(record, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    return digest


class Gateway:
    """What the agents program against: routing + temperatures + retry around
    a concrete backend, with a per-instance exchange log the orchestrator
    reads back for run records."""

    def __init__(
        self,
        backend: Backend,
        routing: ModelRouting = DEFAULT_ROUTING,
        temperatures: Temperatures | None = None,
        retry: RetryPolicy | None = None,
        max_tokens: int = 1024,
    ):
        self.backend = backend
        self.routing = routing
        self.temperatures = temperatures or Temperatures()
        self.retry = retry or RetryPolicy()
        self.max_tokens = max_tokens
        self.call_log: list[tuple[ChatRequest, ChatResponse]] = []

    def chat(self, role: AgentRole, messages: list[ChatMessage]) -> ChatResponse:
        req = ChatRequest(
            model_id=route_model(role, self.routing),
            messages=messages,
            temperature=self.temperatures.for_role(role),
            max_tokens=self.max_tokens,
        )
        resp = complete(req, self.backend, self.retry)
        self.call_log.append((req, resp))
        return resp

    def for_run(
        self,
        routing: ModelRouting | None = None,
        temperatures: Temperatures | None = None,
    ) -> "Gateway":
        """A view sharing this gateway's backend and policies but with its own
        call log (and optionally overridden routing/temperatures), so one
        pipeline run's trace never interleaves with another's."""
        return Gateway(
            backend=self.backend,
            routing=routing or self.routing,
            temperatures=temperatures or self.temperatures,
            retry=self.retry,
            max_tokens=self.max_tokens,
        )

    @property
    def call_count(self) -> int:
        return len(self.call_log)
