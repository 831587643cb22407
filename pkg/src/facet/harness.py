"""Stability benchmarking and score aggregation.

Reproduces the internal evaluation protocol: N repeated pipeline runs per
profile, per-dimension mean and population standard deviation on the
inverted reporting scale (6 = very good), teacher-rating aggregation, and
Markdown/CSV table rendering. Numbers stay full precision internally and
are rounded half-up to one decimal only when a table is rendered.
"""

from __future__ import annotations

import csv
import math
import re
from concurrent.futures import ThreadPoolExecutor
from decimal import ROUND_HALF_UP, Decimal
from importlib import resources
from typing import Callable, Optional

from pydantic import Field

from .errors import (
    EmptyInputError,
    IncompleteGridError,
    UnsupportedTaskError,
)
from .gateway import Gateway
from .model import (
    DIMENSION_LABELS,
    FacetModel,
    LearnerProfile,
    RubricDimension,
    StarterTask,
    TeacherRating,
)
from .pipeline import PipelineConfig, RunRecord, run_pipeline


class StabilityStats(FacetModel):
    profile_id: str
    dimension: RubricDimension
    n: int
    mean: float
    sd: float
    values: list[int]


class RatingAggregate(FacetModel):
    dimension: RubricDimension
    mean: float
    range_min: int
    range_max: int
    k: int


class StabilityResult(FacetModel):
    records: list[RunRecord]
    stats: list[StabilityStats]
    partial: bool = False
    failures: list[str] = Field(default_factory=list)


def compute_stats(values: list[int | float]) -> tuple[float, float]:
    """Arithmetic mean and population standard deviation (divide by n).

    Sums use math.fsum so results are exact to the last ulp and invariant
    under permutation of the input.
    """
    if not values:
        raise EmptyInputError("cannot compute statistics over an empty list")
    n = len(values)
    mean = math.fsum(values) / n
    variance = math.fsum((v - mean) ** 2 for v in values) / n
    return mean, math.sqrt(variance)


def round_half_up(value: float, decimals: int = 1) -> float:
    quantum = Decimal(1).scaleb(-decimals)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def format_cell(mean: float, sd: float) -> str:
    return f"{round_half_up(mean):.1f} ({round_half_up(sd):.1f})"


def aggregate_ratings(ratings: list[TeacherRating], dimension: RubricDimension) -> RatingAggregate:
    if not ratings:
        raise EmptyInputError("no teacher ratings to aggregate")
    values = [r.scores[dimension] for r in ratings]
    mean, _ = compute_stats(values)
    return RatingAggregate(
        dimension=dimension,
        mean=mean,
        range_min=min(values),
        range_max=max(values),
        k=len(values),
    )


# --- stability runs -------------------------------------------------------------


def stability_run(
    profile: LearnerProfile,
    task: StarterTask,
    cfg: PipelineConfig,
    n: int,
    gateway: Gateway,
    store=None,
    jobs: int = 1,
    progress_callback: Optional[Callable[[int, int], None]] = None,
) -> StabilityResult:
    """Run the pipeline ``n`` times, collecting inverted evaluator scores.

    Failed iterations mark the suite partial; statistics cover the
    successes only and report their count as n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")

    def one(_: int) -> RunRecord:
        return run_pipeline(profile, task, cfg, gateway, store=store)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(one, i) for i in range(n)]
            records = []
            for done, future in enumerate(futures, start=1):
                records.append(future.result())
                if progress_callback:
                    progress_callback(done, n)
    else:
        records = []
        for i in range(n):
            records.append(one(i))
            if progress_callback:
                progress_callback(i + 1, n)

    failures = [
        f"iteration {i + 1}: {rec.failure.stage}: {rec.failure.error}"
        for i, rec in enumerate(records)
        if rec.failure is not None
    ]
    succeeded = [rec for rec in records if rec.status == "succeeded"]
    stats = []
    if succeeded:
        for dimension in RubricDimension:
            values = [rec.evaluation.inverted()[dimension] for rec in succeeded]
            mean, sd = compute_stats(values)
            stats.append(
                StabilityStats(
                    profile_id=profile.id,
                    dimension=dimension,
                    n=len(values),
                    mean=mean,
                    sd=sd,
                    values=values,
                )
            )
    return StabilityResult(
        records=records, stats=stats, partial=bool(failures), failures=failures
    )


def render_stats_table(
    stats: list[StabilityStats],
    profiles: list[tuple[str, str]],
    fmt: str = "markdown",
) -> str:
    """One row per dimension, one M (SD) cell per profile.

    ``profiles`` fixes column order as (profileId, columnLabel) pairs.
    Raises IncompleteGridError when any (profile, dimension) cell is absent.
    """
    cells: dict[tuple[str, RubricDimension], StabilityStats] = {
        (s.profile_id, s.dimension): s for s in stats
    }
    for profile_id, _ in profiles:
        for dimension in RubricDimension:
            if (profile_id, dimension) not in cells:
                raise IncompleteGridError(
                    f"missing stats for profile {profile_id}, dimension {dimension.value}"
                )
    if fmt == "markdown":
        header = "| Dimension | " + " | ".join(label for _, label in profiles) + " |"
        divider = "|---" * (len(profiles) + 1) + "|"
        lines = [header, divider]
        for dimension in RubricDimension:
            row = [DIMENSION_LABELS[dimension]]
            for profile_id, _ in profiles:
                s = cells[(profile_id, dimension)]
                row.append(format_cell(s.mean, s.sd))
            lines.append("| " + " | ".join(row) + " |")
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        columns = ["dimension"]
        for _, label in profiles:
            columns += [f"{label} mean", f"{label} sd"]
        lines = [",".join(columns)]
        for dimension in RubricDimension:
            row = [dimension.value]
            for profile_id, _ in profiles:
                s = cells[(profile_id, dimension)]
                row += [f"{round_half_up(s.mean):.1f}", f"{round_half_up(s.sd):.1f}"]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown table format: {fmt}")


# --- answer-key oracle ------------------------------------------------------------

_DIGITS_RE = re.compile(r"[Uu]sing the digits ([0-9,\s]+(?:and\s+\d+)?)")
_LENGTH_WORDS = {"two": 2, "three": 3, "four": 4, "five": 5, "six": 6}
_LENGTH_RE = re.compile(r"form (two|three|four|five|six|\d+)-digit numbers")
_FIRST_GT_RE = re.compile(r"first digit (?:of the number )?must be greater than (\d+)")
_SECOND_PARITY_RE = re.compile(r"second digit must be (even|odd)")


def answer_key_oracle(task: StarterTask) -> int:
    """Canonical answer for enumerable digit-arrangement tasks.

    Parses the statement (digit set, number length, no-repetition clause,
    first-digit bound, second-digit parity) and counts candidates by
    exhaustive enumeration. Anything the grammar cannot parse raises
    UnsupportedTaskError.
    """
    import itertools

    statement = task.statement
    digits_match = _DIGITS_RE.search(statement)
    length_match = _LENGTH_RE.search(statement)
    if not digits_match or not length_match:
        raise UnsupportedTaskError(f"task {task.id} is not an enumerable digit task")
    if "no digit is repeated" not in statement:
        raise UnsupportedTaskError(f"task {task.id} lacks the no-repetition clause")
    digits = [int(d) for d in re.findall(r"\d", digits_match.group(1))]
    raw_length = length_match.group(1)
    length = _LENGTH_WORDS.get(raw_length) or int(raw_length)

    first_gt = _FIRST_GT_RE.search(statement)
    min_first = int(first_gt.group(1)) if first_gt else None
    parity = _SECOND_PARITY_RE.search(statement)

    count = 0
    for candidate in itertools.permutations(digits, length):
        if min_first is not None and not candidate[0] > min_first:
            continue
        if parity and candidate[1] % 2 != (0 if parity.group(1) == "even" else 1):
            continue
        count += 1
    return count


# --- shipped reference data ----------------------------------------------------------


def load_reference_iterations() -> dict[int, dict[RubricDimension, list[int]]]:
    """The shipped 4-worksheet x 10-iteration evaluation scores (inverted
    reporting scale), used as the numeric oracle for the statistics suite."""
    text = resources.files("facet").joinpath("data/stability_iterations.csv").read_text("utf-8")
    table: dict[int, dict[RubricDimension, list[int]]] = {}
    for row in csv.DictReader(text.splitlines()):
        ws = int(row["worksheet"])
        per_ws = table.setdefault(ws, {dim: [] for dim in RubricDimension})
        for dim in RubricDimension:
            per_ws[dim].append(int(float(row[dim.value])))
    return table
