"""HTTP surface for the web UI and scripts.

JSON in/out except worksheets (text/markdown) and stats tables
(text/markdown or text/csv via ``?format=``). Run and stability execution is
asynchronous: POST enqueues a job on a bounded worker pool and clients poll
GET /jobs/{id} (or /stability/{id}) until done.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, ValidationError

from . import __version__
from .config import AppConfig, build_gateway, pipeline_config
from .errors import NotFoundError, StorageError
from .harness import (
    aggregate_ratings,
    format_cell,
    render_stats_table,
    round_half_up,
    stability_run,
)
from .model import (
    LearnerProfile,
    RubricDimension,
    StarterTask,
    TeacherRating,
    validate_worksheet,
)
from .pipeline import new_run_id, run_pipeline
from .store import RunStore

_STATE_RANK = {"queued": 0, "running": 1, "done": 2, "failed": 2}


class JobStatus(BaseModel):
    job_id: str
    state: str = "queued"  # queued | running | done | failed
    stage: Optional[str] = None
    completed: int = 0
    total: int = 1
    error: Optional[str] = None
    run_ids: list[str] = []

    def as_payload(self) -> dict:
        return {
            "jobId": self.job_id,
            "state": self.state,
            "stage": self.stage,
            "progress": {"completed": self.completed, "total": self.total},
            "error": self.error,
            "runIds": self.run_ids,
        }


class JobManager:
    """Bounded worker pool with monotone job state transitions."""

    def __init__(self, workers: int = 4):
        self._pool = ThreadPoolExecutor(max_workers=workers)
        self._jobs: dict[str, JobStatus] = {}
        self._lock = threading.Lock()
        self._counter = 0

    def submit(self, kind: str, total: int, fn, run_ids: list[str] | None = None) -> str:
        with self._lock:
            self._counter += 1
            job_id = f"{kind}-{self._counter:06d}"
            self._jobs[job_id] = JobStatus(job_id=job_id, total=total, run_ids=run_ids or [])
        self._pool.submit(self._run, job_id, fn)
        return job_id

    def _run(self, job_id: str, fn) -> None:
        self.update(job_id, state="running")
        try:
            fn(job_id)
        except Exception as exc:  # job errors surface via polling, never raise
            self.update(job_id, state="failed", error=f"{type(exc).__name__}: {exc}")
        else:
            self.update(job_id, state="done")

    def update(self, job_id: str, **changes) -> None:
        with self._lock:
            job = self._jobs[job_id]
            state = changes.get("state")
            if state is not None:
                if _STATE_RANK[state] < _STATE_RANK[job.state]:
                    raise StorageError(f"job {job_id}: illegal transition {job.state} -> {state}")
                if job.state == "failed" and state == "done":
                    return
            completed = changes.get("completed")
            if completed is not None and completed < job.completed:
                raise StorageError(f"job {job_id}: progress cannot decrease")
            for key, value in changes.items():
                setattr(job, key, value)

    def get(self, job_id: str) -> JobStatus:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise NotFoundError(f"job {job_id} not found")
        return job.model_copy()


def _validation_details(exc: ValidationError) -> list[dict]:
    return [
        {"loc": list(err["loc"]), "msg": err["msg"], "type": err["type"]}
        for err in exc.errors(include_url=False)
    ]


class RunRequest(BaseModel):
    profileId: str
    taskId: str
    configId: str = "default"


class StabilityRequest(BaseModel):
    profileId: str
    taskId: str
    n: int = 10
    configId: str = "default"


def create_app(config: AppConfig | None = None, gateway=None) -> FastAPI:
    """Build the application; ``gateway`` can be injected for tests."""
    config = config or AppConfig()
    store = RunStore(config.store_dir)
    gateway = gateway or build_gateway(config)
    configs = {"default": pipeline_config(config)}
    jobs = JobManager(workers=config.server.workers)
    stability_payloads: dict[str, dict] = {}

    app = FastAPI(title="facet", version=__version__)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.store = store
    app.state.jobs = jobs
    app.state.gateway = gateway

    def _get_or_404(getter, entity_id: str):
        try:
            return getter(entity_id)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    def _resolve_config(config_id: str):
        if config_id not in configs:
            raise HTTPException(status_code=404, detail=f"unknown configId {config_id}")
        return configs[config_id]

    # --- health -------------------------------------------------------------

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "version": __version__}

    # --- profiles / tasks ------------------------------------------------------

    @app.post("/profiles", status_code=201)
    def create_profile(body: dict):
        try:
            profile = LearnerProfile.model_validate(body)
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=_validation_details(exc))
        store.save_profile(profile)
        return {"id": profile.id}

    @app.get("/profiles")
    def list_profiles():
        return [p.model_dump(by_alias=True) for p in store.list_profiles()]

    @app.get("/profiles/{profile_id}")
    def get_profile(profile_id: str):
        return _get_or_404(store.get_profile, profile_id).model_dump(by_alias=True)

    @app.post("/tasks", status_code=201)
    def create_task(body: dict):
        try:
            task = StarterTask.model_validate(body)
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=_validation_details(exc))
        store.save_task(task)
        return {"id": task.id}

    @app.get("/tasks")
    def list_tasks():
        return [t.model_dump(by_alias=True) for t in store.list_tasks()]

    @app.get("/tasks/{task_id}")
    def get_task(task_id: str):
        return _get_or_404(store.get_task, task_id).model_dump(by_alias=True)

    # --- runs -------------------------------------------------------------------

    @app.post("/runs", status_code=202)
    def create_run(body: RunRequest):
        profile = _get_or_404(store.get_profile, body.profileId)
        task = _get_or_404(store.get_task, body.taskId)
        cfg = _resolve_config(body.configId)
        run_id = new_run_id()

        def execute(job_id: str):
            def on_stage(stage: str):
                jobs.update(job_id, stage=stage)

            record = run_pipeline(
                profile, task, cfg, gateway, store=store, run_id=run_id,
                stage_callback=on_stage,
            )
            jobs.update(job_id, completed=1)
            if record.status == "failed":
                raise RuntimeError(f"{record.failure.stage}: {record.failure.error}")

        job_id = jobs.submit("run", total=1, fn=execute, run_ids=[run_id])
        return {"runId": run_id, "jobId": job_id}

    @app.get("/runs")
    def list_runs(
        profileId: Optional[str] = None,
        taskId: Optional[str] = None,
        status: Optional[str] = None,
    ):
        records = store.list_runs(profile_id=profileId, task_id=taskId, status=status)
        return [r.model_dump(by_alias=True, exclude={"stages"}) for r in records]

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        record = _get_or_404(store.get_run, run_id)
        payload = record.model_dump(by_alias=True)
        if record.evaluation is not None:
            payload["evaluation"]["invertedScores"] = {
                dim.value: value for dim, value in record.evaluation.inverted().items()
            }
        return payload

    @app.get("/runs/{run_id}/worksheet.md")
    def get_worksheet_markdown(run_id: str):
        try:
            record = store.get_run(run_id)
        except NotFoundError:
            if _run_in_flight(jobs, run_id):
                raise HTTPException(status_code=409, detail="run still executing")
            raise HTTPException(status_code=404, detail=f"run {run_id} not found")
        if record.worksheet is None:
            raise HTTPException(status_code=404, detail="run produced no worksheet")
        cfg = configs["default"]
        if validate_worksheet(record.worksheet, cfg.constraints):
            raise HTTPException(status_code=409, detail="stored worksheet fails validation")
        return Response(content=record.worksheet.markdown, media_type="text/markdown")

    @app.get("/baseline.md")
    def get_baseline_markdown():
        return Response(content=configs["default"].resolve_baseline(), media_type="text/markdown")

    # --- jobs ----------------------------------------------------------------------

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        try:
            return jobs.get(job_id).as_payload()
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    # --- ratings ----------------------------------------------------------------------

    @app.post("/ratings", status_code=201)
    def create_rating(body: dict):
        try:
            rating = TeacherRating.model_validate(body)
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=_validation_details(exc))
        try:
            rating_id = store.save_teacher_rating(rating)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return {"id": rating_id}

    @app.get("/worksheets/{worksheet_ref}/ratings")
    def get_ratings(worksheet_ref: str):
        _get_or_404(store.resolve_worksheet, worksheet_ref)
        ratings = store.list_ratings(worksheet_ref)
        return [r.model_dump(by_alias=True) for r in ratings]

    @app.get("/worksheets/{worksheet_ref}/ratings/aggregate")
    def get_rating_aggregate(worksheet_ref: str):
        _get_or_404(store.resolve_worksheet, worksheet_ref)
        ratings = store.list_ratings(worksheet_ref)
        if not ratings:
            raise HTTPException(status_code=404, detail="no ratings recorded")
        payload = {}
        for dim in RubricDimension:
            agg = aggregate_ratings(ratings, dim)
            entry = agg.model_dump(by_alias=True)
            # display string so the UI never does score arithmetic
            entry["display"] = (
                f"{round_half_up(agg.mean):.1f} ({agg.range_min}–{agg.range_max})"
            )
            payload[dim.value] = entry
        return payload

    # --- stability ------------------------------------------------------------------------

    @app.post("/stability", status_code=202)
    def create_stability(body: StabilityRequest):
        if body.n < 1:
            raise HTTPException(status_code=400, detail="n must be >= 1")
        profile = _get_or_404(store.get_profile, body.profileId)
        task = _get_or_404(store.get_task, body.taskId)
        cfg = _resolve_config(body.configId)

        def execute(job_id: str):
            def on_progress(done: int, total: int):
                jobs.update(job_id, completed=done)

            result = stability_run(
                profile, task, cfg, body.n, gateway, store=store,
                progress_callback=on_progress,
            )
            stats = []
            for s in result.stats:
                entry = s.model_dump(by_alias=True)
                entry["cell"] = format_cell(s.mean, s.sd)
                stats.append(entry)
            columns = [(profile.id, profile.label)]
            stability_payloads[job_id] = {
                "stats": stats,
                "partial": result.partial,
                "failures": result.failures,
                "failedIterations": [
                    i + 1 for i, r in enumerate(result.records) if r.status == "failed"
                ],
                "runIds": [r.run_id for r in result.records],
                "table": render_stats_table(result.stats, columns, fmt="markdown")
                if result.stats
                else "",
                "tableCsv": render_stats_table(result.stats, columns, fmt="csv")
                if result.stats
                else "",
            }
            jobs.update(job_id, run_ids=[r.run_id for r in result.records])

        job_id = jobs.submit("stability", total=body.n, fn=execute)
        return {"jobId": job_id}

    @app.get("/stability/{job_id}")
    def get_stability(job_id: str, format: str = Query(default="json")):
        try:
            job = jobs.get(job_id)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        payload = job.as_payload()
        if job.state == "done":
            result = stability_payloads.get(job_id)
            payload["result"] = result
            if format == "markdown" and result:
                return Response(content=result["table"], media_type="text/markdown")
            if format == "csv" and result:
                return Response(content=result["tableCsv"], media_type="text/csv")
        return payload

    static_dir = config.server.static_dir
    if static_dir and Path(static_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def _run_in_flight(jobs: JobManager, run_id: str) -> bool:
    with jobs._lock:
        statuses = list(jobs._jobs.values())
    return any(
        run_id in job.run_ids and job.state in ("queued", "running") for job in statuses
    )
