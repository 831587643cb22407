"""Sequential learner -> teacher -> evaluator pipeline and its run records."""

from __future__ import annotations

import time
import uuid
from datetime import datetime, timezone
from typing import Callable, Optional

from pydantic import Field

from .agents import DidacticalDirectives, extract_envelope, run_evaluator, run_learner, run_teacher
from .errors import FacetError, GradeMismatchError
from .gateway import ChatMessage, Gateway, ModelRouting, Temperatures, DEFAULT_ROUTING
from .model import (
    Constraints,
    EvaluationReport,
    FacetModel,
    LearnerProfile,
    LearnerTranscript,
    StarterTask,
    Worksheet,
)
from .templating import default_baseline_worksheet

STAGES = ("learner", "teacher", "evaluator")


class PipelineConfig(FacetModel):
    routing: ModelRouting = DEFAULT_ROUTING
    constraints: Constraints = Field(default_factory=Constraints)
    directives: DidacticalDirectives = Field(default_factory=DidacticalDirectives)
    temperatures: Temperatures = Field(default_factory=Temperatures)
    baseline_ref: str = "default"
    templates_dir: Optional[str] = None

    def resolve_baseline(self) -> str:
        if self.baseline_ref == "default":
            return default_baseline_worksheet()
        from pathlib import Path

        path = Path(self.baseline_ref)
        if not path.exists():
            raise FacetError(f"baseline worksheet not found: {self.baseline_ref}")
        return path.read_text(encoding="utf-8")


class StageTrace(FacetModel):
    """Full transparency for one agent stage: the request messages of every
    attempt plus each raw model response."""

    role: str
    model_id: str
    request_messages: list[ChatMessage]
    responses: list[str]


class RunFailure(FacetModel):
    stage: str
    error: str


class RunRecord(FacetModel):
    """Immutable record of one pipeline execution."""

    run_id: str
    profile: LearnerProfile
    task: StarterTask
    transcript: Optional[LearnerTranscript] = None
    worksheet: Optional[Worksheet] = None
    evaluation: Optional[EvaluationReport] = None
    teacher_analysis: Optional[str] = None
    stages: list[StageTrace] = Field(default_factory=list)
    model_ids: dict[str, str] = Field(default_factory=dict)
    created_at: str = ""
    finished_at: str = ""
    status: str = "succeeded"
    failure: Optional[RunFailure] = None


def new_run_id() -> str:
    """Monotonic timestamp plus random suffix."""
    return f"run-{time.time_ns():019d}-{uuid.uuid4().hex[:8]}"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def run_pipeline(
    profile: LearnerProfile,
    task: StarterTask,
    cfg: PipelineConfig,
    gateway: Gateway,
    store=None,
    run_id: Optional[str] = None,
    stage_callback: Optional[Callable[[str], None]] = None,
) -> RunRecord:
    """Execute exactly one learner -> teacher -> evaluator iteration.

    A stage failure never raises: it yields a record with status
    ``failed`` capturing the stage and error, so partial pipelines stay
    inspectable. The finalized record is persisted before returning when a
    store is given.
    """
    if task.grade != profile.grade:
        raise GradeMismatchError(
            f"task grade {task.grade} does not match profile grade {profile.grade}"
        )
    run_id = run_id or new_run_id()
    created_at = _now()
    baseline = cfg.resolve_baseline()
    gateway = gateway.for_run(cfg.routing, cfg.temperatures)

    transcript: Optional[LearnerTranscript] = None
    worksheet: Optional[Worksheet] = None
    evaluation: Optional[EvaluationReport] = None
    analysis: Optional[str] = None
    failure: Optional[RunFailure] = None

    stage_bounds: list[tuple[str, int, int]] = []

    for stage in STAGES:
        if stage_callback:
            stage_callback(stage)
        begin = len(gateway.call_log)
        try:
            if stage == "learner":
                transcript = run_learner(profile, task, gateway, cfg.templates_dir)
            elif stage == "teacher":
                worksheet = run_teacher(
                    profile, transcript, cfg.directives, cfg.constraints, gateway, cfg.templates_dir
                )
                analysis = _teacher_analysis(gateway, begin)
            else:
                evaluation = run_evaluator(
                    worksheet, profile, baseline, gateway,
                    worksheet_ref=run_id, templates_dir=cfg.templates_dir,
                )
        except FacetError as exc:
            failure = RunFailure(stage=stage, error=f"{type(exc).__name__}: {exc}")
            stage_bounds.append((stage, begin, len(gateway.call_log)))
            break
        stage_bounds.append((stage, begin, len(gateway.call_log)))

    stages = []
    model_ids: dict[str, str] = {}
    for stage, begin, end in stage_bounds:
        exchanges = gateway.call_log[begin:end]
        if not exchanges:
            continue
        stages.append(
            StageTrace(
                role=stage,
                model_id=exchanges[0][0].model_id,
                request_messages=list(exchanges[0][0].messages),
                responses=[resp.content for _, resp in exchanges],
            )
        )
        model_ids[stage] = exchanges[0][0].model_id

    record = RunRecord(
        run_id=run_id,
        profile=profile,
        task=task,
        transcript=transcript,
        worksheet=worksheet,
        evaluation=evaluation,
        teacher_analysis=analysis,
        stages=stages,
        model_ids=model_ids,
        created_at=created_at,
        finished_at=_now(),
        status="failed" if failure else "succeeded",
        failure=failure,
    )
    if store is not None:
        store.save_run(record)
    return record


def _teacher_analysis(gateway: Gateway, begin: int) -> Optional[str]:
    """The diagnostic 'analysis' field of the successful teacher reply."""
    for _, resp in reversed(gateway.call_log[begin:]):
        try:
            value = extract_envelope(resp.content).data.get("analysis")
        except FacetError:
            continue
        if value:
            return str(value)
    return None
