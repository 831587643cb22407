"""Command-line entry points: generate, bench, evaluate, serve.

Exit codes: 0 success, 1 failed pipeline stage or unusable agent output,
2 invalid input (bad flags, malformed files).
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import click
from pydantic import ValidationError

from .agents import run_evaluator
from .config import build_gateway, load_config, pipeline_config
from .errors import FacetError, MalformedAgentOutput, ScoreOutOfRange
from .harness import render_stats_table, stability_run
from .model import (
    LearnerProfile,
    Level,
    RubricDimension,
    StarterTask,
    Worksheet,
    canonical_json,
    expand_profile_grid,
    invert_score,
)
from .pipeline import run_pipeline
from .store import RunStore

EXIT_OK = 0
EXIT_STAGE_FAILED = 1
EXIT_BAD_INPUT = 2


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_model(path: str, model_cls, what: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
        return model_cls.model_validate_json(text)
    except (OSError, ValueError, ValidationError) as exc:
        _fail(EXIT_BAD_INPUT, f"cannot load {what} from {path}: {exc}")


@click.group()
def main():
    """Generate and evaluate individualized one-page math worksheets."""


@main.command()
@click.option("--profile", "profile_path", required=True, type=click.Path(exists=False))
@click.option("--task", "task_path", required=True, type=click.Path(exists=False))
@click.option("--config", "config_path", default=None, envvar="FACET_CONFIG")
@click.option("--out", "out_dir", default=".", type=click.Path(file_okay=False))
def generate(profile_path, task_path, config_path, out_dir):
    """Run one pipeline; write worksheet.md, evaluation.json and run.json."""
    profile = _load_model(profile_path, LearnerProfile, "learner profile")
    task = _load_model(task_path, StarterTask, "starter task")
    try:
        app_cfg = load_config(config_path)
        gateway = build_gateway(app_cfg)
        cfg = pipeline_config(app_cfg)
        store = RunStore(app_cfg.store_dir)
    except FacetError as exc:
        _fail(EXIT_BAD_INPUT, str(exc))
    try:
        record = run_pipeline(profile, task, cfg, gateway, store=store)
    except FacetError as exc:
        _fail(EXIT_BAD_INPUT, str(exc))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run.json").write_text(canonical_json(record), encoding="utf-8")
    if record.worksheet is not None:
        (out / "worksheet.md").write_text(record.worksheet.markdown, encoding="utf-8")
    if record.evaluation is not None:
        (out / "evaluation.json").write_text(canonical_json(record.evaluation), encoding="utf-8")
    if record.status == "failed":
        click.echo(
            f"pipeline failed at {record.failure.stage}: {record.failure.error}", err=True
        )
        sys.exit(EXIT_STAGE_FAILED)
    click.echo(f"run {record.run_id} written to {out}")


@main.command()
@click.option("--grid", is_flag=True, required=True, help="Expand the 2x2 knowledge/motivation grid.")
@click.option("--iterations", type=int, required=True)
@click.option("--config", "config_path", default=None, envvar="FACET_CONFIG")
@click.option("--profile", "profile_path", default=None, help="Base profile file (demographics).")
@click.option("--task", "task_path", default=None)
@click.option("--format", "fmt", type=click.Choice(["markdown", "csv"]), default="markdown")
@click.option("--jobs", type=int, default=4)
def bench(grid, iterations, config_path, profile_path, task_path, fmt, jobs):
    """Stability benchmark over the profile grid; prints the stats table."""
    if iterations < 1:
        _fail(EXIT_BAD_INPUT, "--iterations must be >= 1")
    if jobs < 1:
        _fail(EXIT_BAD_INPUT, "--jobs must be >= 1")
    try:
        app_cfg = load_config(config_path)
        gateway = build_gateway(app_cfg)
        cfg = pipeline_config(app_cfg)
        store = RunStore(app_cfg.store_dir)
    except FacetError as exc:
        _fail(EXIT_BAD_INPUT, str(exc))

    from .fixtures import sample_base_profile, sample_digit_task

    base = (
        _load_model(profile_path, LearnerProfile, "learner profile")
        if profile_path
        else sample_base_profile()
    )
    task = (
        _load_model(task_path, StarterTask, "starter task")
        if task_path
        else sample_digit_task(grade=base.grade)
    )

    profiles = expand_profile_grid([Level.LOW, Level.HIGH], [Level.LOW, Level.HIGH], base)
    all_stats = []
    partial = False
    for profile in profiles:
        result = stability_run(
            profile, task, cfg, iterations, gateway, store=store, jobs=jobs
        )
        if result.partial or not result.stats:
            partial = True
            for line in result.failures:
                click.echo(f"warning: {profile.label}: {line}", err=True)
        all_stats.extend(result.stats)

    # profiles where every iteration failed have no stats; render the rest
    covered = {(s.profile_id, s.dimension) for s in all_stats}
    printable = [
        p for p in profiles
        if all((p.id, dim) in covered for dim in RubricDimension)
    ]
    if not printable:
        _fail(EXIT_STAGE_FAILED, "no profile completed a single iteration")
    for profile in profiles:
        if profile not in printable:
            click.echo(f"warning: {profile.label}: omitted from table (no successes)", err=True)
    table = render_stats_table(
        [s for s in all_stats if any(s.profile_id == p.id for p in printable)],
        [(p.id, p.label) for p in printable],
        fmt=fmt,
    )
    click.echo(table, nl=False)
    if partial:
        sys.exit(EXIT_STAGE_FAILED)


@main.command()
@click.option("--worksheet", "worksheet_path", required=True)
@click.option("--profile", "profile_path", required=True)
@click.option("--baseline", "baseline_path", default=None)
@click.option("--config", "config_path", default=None, envvar="FACET_CONFIG")
def evaluate(worksheet_path, profile_path, baseline_path, config_path):
    """Score an existing worksheet file; prints the report as JSON."""
    profile = _load_model(profile_path, LearnerProfile, "learner profile")
    try:
        markdown = Path(worksheet_path).read_text(encoding="utf-8")
    except OSError as exc:
        _fail(EXIT_BAD_INPUT, f"cannot read worksheet: {exc}")
    if not markdown.strip():
        _fail(EXIT_BAD_INPUT, "worksheet file is empty")
    try:
        app_cfg = load_config(config_path)
        gateway = build_gateway(app_cfg).for_run(app_cfg.routing, app_cfg.temperatures)
        cfg = pipeline_config(app_cfg)
    except FacetError as exc:
        _fail(EXIT_BAD_INPUT, str(exc))

    if baseline_path:
        try:
            baseline = Path(baseline_path).read_text(encoding="utf-8")
        except OSError as exc:
            _fail(EXIT_BAD_INPUT, f"cannot read baseline: {exc}")
    else:
        baseline = cfg.resolve_baseline()
        click.echo("note: using the shipped default baseline worksheet", err=True)

    worksheet_ref = "ws-" + hashlib.sha256(markdown.encode("utf-8")).hexdigest()[:12]
    worksheet = Worksheet(
        intro=markdown.strip().splitlines()[0],
        tasks=[],
        profile_id=profile.id,
        markdown=markdown,
        word_count=len(markdown.split()),
    )
    try:
        report = run_evaluator(
            worksheet, profile, baseline, gateway,
            worksheet_ref=worksheet_ref, templates_dir=cfg.templates_dir,
        )
    except (MalformedAgentOutput, ScoreOutOfRange) as exc:
        _fail(EXIT_STAGE_FAILED, f"evaluator failed: {exc}")
    except FacetError as exc:
        _fail(EXIT_STAGE_FAILED, str(exc))

    payload = report.model_dump(by_alias=True, mode="json")
    payload["invertedScores"] = {
        s.dimension.value: invert_score(s.raw) for s in report.scores
    }
    click.echo(json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True))


@main.command()
@click.option("--config", "config_path", default=None, envvar="FACET_CONFIG")
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--workers", type=int, default=None, help="Job worker pool size.")
@click.option("--store", "store_dir", default=None, help="Store directory override.")
def serve(config_path, host, port, workers, store_dir):
    """Serve the HTTP API (and the web UI when a static dir is configured)."""
    import uvicorn

    from .api import create_app

    try:
        app_cfg = load_config(config_path)
    except FacetError as exc:
        _fail(EXIT_BAD_INPUT, str(exc))
    if workers is not None:
        app_cfg = app_cfg.model_copy(
            update={"server": app_cfg.server.model_copy(update={"workers": workers})}
        )
    if store_dir is not None:
        app_cfg = app_cfg.model_copy(update={"store_dir": store_dir})
    app = create_app(app_cfg)
    uvicorn.run(app, host=host or app_cfg.server.host, port=port or app_cfg.server.port)


if __name__ == "__main__":
    main()
