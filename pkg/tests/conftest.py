"""Shared fixtures: a materialized demo directory and canned backends."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from facet.fixtures import materialize_demo, sample_base_profile, sample_digit_task
from facet.gateway import ChatRequest, ChatResponse


class ScriptedBackend:
    """Returns authored response bodies in order, sticking on the last."""

    def __init__(self, contents: list[str]):
        self.contents = list(contents)
        self.requests: list[ChatRequest] = []

    def send(self, req: ChatRequest, timeout: float) -> ChatResponse:
        content = self.contents[min(len(self.requests), len(self.contents) - 1)]
        self.requests.append(req)
        return ChatResponse(content=content, model_id=req.model_id)

    @property
    def call_count(self) -> int:
        return len(self.requests)


class FailingBackend:
    """Raises a given exception for every request."""

    def __init__(self, exc_factory):
        self.exc_factory = exc_factory
        self.call_count = 0

    def send(self, req: ChatRequest, timeout: float) -> ChatResponse:
        self.call_count += 1
        raise self.exc_factory()


@pytest.fixture(scope="session")
def demo_dir(tmp_path_factory) -> Path:
    """One shared demo directory: config.json, profile.json, task.json and a
    recorded replay store for the whole 2x2 grid."""
    target = tmp_path_factory.mktemp("demo")
    return materialize_demo(target)


@pytest.fixture()
def base_profile():
    return sample_base_profile()


@pytest.fixture()
def digit_task():
    return sample_digit_task()


@pytest.fixture(scope="session")
def goldens() -> dict:
    path = Path(__file__).parent / "data" / "prompt_goldens.json"
    return json.loads(path.read_text(encoding="utf-8"))


def partial_replay(demo_dir: Path, dst: Path, keep_stages: tuple[str, ...]) -> Path:
    """Copy only some stage fixtures from the demo replay store into ``dst``."""
    dst.mkdir(parents=True, exist_ok=True)
    for path in (demo_dir / "replay").glob("*.json"):
        data = json.loads(path.read_text())
        system = data["request"]["messages"][0]["content"]
        if system.startswith("You are a"):
            stage = "learner"
        elif system.startswith("You provide a clear picture"):
            stage = "teacher"
        else:
            stage = "evaluator"
        if stage in keep_stages:
            (dst / path.name).write_text(path.read_text())
    return dst
