"""Engine configuration file: endpoints, routing, policies, paths.

A single JSON document consumed by both the CLI and the HTTP server.
Relative paths are resolved against the config file's own directory so a
config can travel with its replay fixtures and store.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Optional

from pydantic import Field

from .agents import DidacticalDirectives
from .errors import FacetError
from .gateway import (
    DEFAULT_ROUTING,
    Gateway,
    LiveBackend,
    ModelRouting,
    RecordingBackend,
    ReplayBackend,
    RetryPolicy,
    Temperatures,
)
from .model import Constraints, FacetModel
from .pipeline import PipelineConfig


class EndpointConfig(FacetModel):
    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"


class ServerConfig(FacetModel):
    host: str = "127.0.0.1"
    port: int = 8000
    workers: int = 4
    static_dir: Optional[str] = None


class ConcurrencyConfig(FacetModel):
    max_in_flight: int = 8
    rate_per_second: Optional[float] = None


class AppConfig(FacetModel):
    backend: str = "replay"  # replay | live | record
    replay_dir: str = "replay"
    record_dir: Optional[str] = None
    endpoint: EndpointConfig = Field(default_factory=EndpointConfig)
    routing: ModelRouting = DEFAULT_ROUTING
    temperatures: Temperatures = Field(default_factory=Temperatures)
    retry: RetryPolicy = Field(default_factory=RetryPolicy)
    max_tokens: int = 1024
    constraints: Constraints = Field(default_factory=Constraints)
    directives: DidacticalDirectives = Field(default_factory=DidacticalDirectives)
    baseline_ref: str = "default"
    templates_dir: Optional[str] = None
    store_dir: str = "store"
    server: ServerConfig = Field(default_factory=ServerConfig)
    concurrency: ConcurrencyConfig = Field(default_factory=ConcurrencyConfig)


def load_config(path: str | Path | None) -> AppConfig:
    """Load a config file, resolving relative paths against its directory.

    ``None`` returns defaults anchored at the current working directory.
    """
    if path is None:
        return AppConfig()
    path = Path(path)
    if not path.exists():
        raise FacetError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FacetError(f"config file is not valid JSON: {exc}") from exc
    cfg = AppConfig.model_validate(data)
    anchor = path.parent
    return cfg.model_copy(
        update={
            "replay_dir": _anchored(anchor, cfg.replay_dir),
            "record_dir": _anchored(anchor, cfg.record_dir),
            "store_dir": _anchored(anchor, cfg.store_dir),
            "templates_dir": _anchored(anchor, cfg.templates_dir),
            "baseline_ref": cfg.baseline_ref
            if cfg.baseline_ref == "default"
            else _anchored(anchor, cfg.baseline_ref),
            "server": cfg.server.model_copy(
                update={"static_dir": _anchored(anchor, cfg.server.static_dir)}
            ),
        }
    )


def _anchored(anchor: Path, value: Optional[str]) -> Optional[str]:
    if value is None:
        return None
    p = Path(value)
    return str(p if p.is_absolute() else anchor / p)


def build_backend(cfg: AppConfig):
    if cfg.backend == "replay":
        return ReplayBackend(cfg.replay_dir)
    api_key = os.environ.get(cfg.endpoint.api_key_env, "")
    live = LiveBackend(
        base_url=cfg.endpoint.base_url,
        api_key=api_key,
        max_in_flight=cfg.concurrency.max_in_flight,
        rate_per_second=cfg.concurrency.rate_per_second,
    )
    if cfg.backend == "live":
        return live
    if cfg.backend == "record":
        return RecordingBackend(live, cfg.record_dir or cfg.replay_dir)
    raise FacetError(f"unknown backend kind: {cfg.backend}")


def build_gateway(cfg: AppConfig) -> Gateway:
    return Gateway(
        backend=build_backend(cfg),
        routing=cfg.routing,
        temperatures=cfg.temperatures,
        retry=cfg.retry,
        max_tokens=cfg.max_tokens,
    )


def pipeline_config(cfg: AppConfig) -> PipelineConfig:
    return PipelineConfig(
        routing=cfg.routing,
        constraints=cfg.constraints,
        directives=cfg.directives,
        temperatures=cfg.temperatures,
        baseline_ref=cfg.baseline_ref,
        templates_dir=cfg.templates_dir,
    )
