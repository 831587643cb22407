"""Domain types exchanged between the agents, plus pure score/validation ops.

All types are immutable pydantic models. Canonical JSON uses the camelCase
field names of the external schema (``solutionSteps``, ``wordCount``, ...),
lowercase enum values, and sorted keys so persisted documents are
byte-reproducible.
"""

from __future__ import annotations

import itertools
import json
from enum import Enum
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic.alias_generators import to_camel

from .errors import EmptyGridError, ScoreOutOfRange


class FacetModel(BaseModel):
    """Base for all domain types: frozen, camelCase wire names."""

    model_config = ConfigDict(
        frozen=True,
        populate_by_name=True,
        alias_generator=to_camel,
    )


def canonical_json(value: Any) -> str:
    """Serialize a domain object (or plain data) to canonical JSON text.

    Sorted keys, two-space indent, UTF-8 passthrough, None fields omitted.
    The same bytes come back for the same value, which the run store relies
    on for byte-identical round trips.
    """
    if isinstance(value, BaseModel):
        value = value.model_dump(by_alias=True, mode="json", exclude_none=True)
    return json.dumps(value, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


# --- enums -------------------------------------------------------------------


class Level(str, Enum):
    """Binary knowledge / motivation level."""

    LOW = "low"
    HIGH = "high"


class Gender(str, Enum):
    MALE = "male"
    FEMALE = "female"
    UNSPECIFIED = "unspecified"


class BloomTier(str, Enum):
    """Task difficulty tier: recall, transfer, abstraction."""

    EASY = "easy"
    MEDIUM = "medium"
    ADVANCED = "advanced"


class RubricDimension(str, Enum):
    DIDACTICAL_STRUCTURE = "didacticalStructure"
    CLARITY = "clarity"
    CREATIVITY = "creativity"
    SUITABILITY = "suitability"


DIMENSION_LABELS = {
    RubricDimension.DIDACTICAL_STRUCTURE: "Didactical structure",
    RubricDimension.CLARITY: "Clarity of the task",
    RubricDimension.CREATIVITY: "Creativity",
    RubricDimension.SUITABILITY: "Suitability of the task for learners",
}


# --- learner side ------------------------------------------------------------


class LearnerProfile(FacetModel):
    """Persona seed for the learner agent."""

    id: str
    knowledge: Level
    motivation: Level
    age: Optional[int] = None
    gender: Gender = Gender.UNSPECIFIED
    grade: int
    subject: str = "mathematics"
    interests: list[str] = Field(default_factory=list)
    notes: Optional[str] = None

    @field_validator("grade")
    @classmethod
    def _grade_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("grade must be >= 1")
        return v

    @field_validator("age")
    @classmethod
    def _age_positive(cls, v: Optional[int]) -> Optional[int]:
        if v is not None and v <= 0:
            raise ValueError("age must be > 0 when present")
        return v

    @property
    def label(self) -> str:
        """Short badge like ``K_H M_L``."""
        k = "H" if self.knowledge is Level.HIGH else "L"
        m = "H" if self.motivation is Level.HIGH else "L"
        return f"K_{k} M_{m}"


class StarterTask(FacetModel):
    """Curriculum task the learner agent engages with."""

    id: str
    grade: int
    topic: str
    statement: str
    answer_key: Optional[str] = None

    @field_validator("statement")
    @classmethod
    def _statement_non_empty(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("statement must be non-empty")
        return v


class LearnerTranscript(FacetModel):
    """What the learner agent produced while working the starter task."""

    solution_steps: list[str]
    misconceptions: list[str] = Field(default_factory=list)
    affective_cues: list[str] = Field(default_factory=list)
    final_answer: Optional[str] = None
    raw_text: str

    @field_validator("solution_steps")
    @classmethod
    def _steps_non_empty(cls, v: list[str]) -> list[str]:
        if not v:
            raise ValueError("solutionSteps must be non-empty")
        return v

    @field_validator("raw_text")
    @classmethod
    def _raw_non_empty(cls, v: str) -> str:
        if not v:
            raise ValueError("rawText must be non-empty")
        return v


# --- worksheet side ----------------------------------------------------------


class WorksheetTask(FacetModel):
    index: int
    tier: BloomTier
    statement: str
    hints: list[str] = Field(default_factory=list)
    scaffolds: list[str] = Field(default_factory=list)
    motivational_comment: Optional[str] = None


class Worksheet(FacetModel):
    """One-page artifact produced by the teacher agent.

    Deliberately lax at construction time: constraint checks (task count,
    word budget, statement containment) are data produced by
    :func:`validate_worksheet`, not construction failures, so invalid model
    output can be represented and reported.
    """

    intro: str
    tasks: list[WorksheetTask]
    profile_id: str
    markdown: str
    word_count: int


class Constraints(FacetModel):
    """Hard output constraints injected into the teacher prompt."""

    min_tasks: int = 3
    max_tasks: int = 5
    word_budget: int = 400
    page_limit: int = 1

    @model_validator(mode="after")
    def _check(self) -> "Constraints":
        if not (1 <= self.min_tasks <= self.max_tasks):
            raise ValueError("need 1 <= minTasks <= maxTasks")
        if self.word_budget < 50:
            raise ValueError("wordBudget must be >= 50")
        if self.page_limit != 1:
            raise ValueError("pageLimit is fixed at 1")
        return self


class RubricScore(FacetModel):
    dimension: RubricDimension
    raw: int
    justification: str = ""

    @field_validator("raw")
    @classmethod
    def _raw_in_scale(cls, v: int) -> int:
        if not 1 <= v <= 6:
            raise ValueError("raw score must be in 1..6")
        return v


class EvaluationReport(FacetModel):
    """Four rubric scores (raw scale, 1 = best) plus diagnostics."""

    scores: list[RubricScore]
    diagnostics: str = ""
    worksheet_ref: str

    @field_validator("scores")
    @classmethod
    def _one_score_per_dimension(cls, v: list[RubricScore]) -> list[RubricScore]:
        dims = [s.dimension for s in v]
        if len(set(dims)) != len(dims):
            raise ValueError("duplicate rubric dimension")
        if set(dims) != set(RubricDimension):
            missing = sorted(d.value for d in set(RubricDimension) - set(dims))
            raise ValueError(f"missing rubric dimensions: {missing}")
        order = list(RubricDimension)
        return sorted(v, key=lambda s: order.index(s.dimension))

    def score(self, dimension: RubricDimension) -> RubricScore:
        return next(s for s in self.scores if s.dimension is dimension)

    def inverted(self) -> dict[RubricDimension, int]:
        """Scores on the reporting scale (6 = very good)."""
        return {s.dimension: invert_score(s.raw) for s in self.scores}


class TeacherRating(FacetModel):
    """Human rating, entered on the inverted scale (1 = insufficient)."""

    rater_id: str
    worksheet_ref: str
    scores: dict[RubricDimension, int]
    open_feedback: str = ""

    @field_validator("scores")
    @classmethod
    def _complete_and_in_scale(
        cls, v: dict[RubricDimension, int]
    ) -> dict[RubricDimension, int]:
        if set(v) != set(RubricDimension):
            raise ValueError("all four dimensions must be scored")
        for dim, value in v.items():
            if not 1 <= value <= 6:
                raise ValueError(f"{dim.value} score must be in 1..6")
        return v


# --- operations ---------------------------------------------------------------


def invert_score(raw: int) -> int:
    """Map between the evaluator scale (1 = best) and the reporting scale
    (6 = very good). The map is its own inverse: 7 - s."""
    if not isinstance(raw, int) or isinstance(raw, bool) or not 1 <= raw <= 6:
        raise ScoreOutOfRange(raw)
    return 7 - raw


def validate_worksheet(ws: Worksheet, cfg: Constraints) -> list[str]:
    """Check every worksheet invariant under the given constraints.

    Returns the (possibly empty) list of violated invariants; an empty list
    means the worksheet is valid. Violations are data, not failures.
    """
    violations: list[str] = []
    if not ws.intro.strip():
        violations.append("intro is empty")
    if len(ws.tasks) < 1:
        violations.append("tasks.length < 1")
    if len(ws.tasks) > cfg.max_tasks:
        violations.append(
            f"tasks.length exceeds maxTasks ({len(ws.tasks)} > {cfg.max_tasks})"
        )
    if ws.word_count > cfg.word_budget:
        violations.append(
            f"wordCount exceeds budget ({ws.word_count} > {cfg.word_budget})"
        )
    for task in ws.tasks:
        if not task.statement.strip():
            violations.append(f"task {task.index} statement is empty")
        elif task.statement not in ws.markdown:
            violations.append(f"markdown missing task {task.index} statement")
    indices = [t.index for t in ws.tasks]
    if indices != list(range(1, len(ws.tasks) + 1)):
        violations.append("task indices not consecutive from 1")
    return violations


def expand_profile_grid(
    knowledge_levels: list[Level],
    motivation_levels: list[Level],
    base: LearnerProfile,
) -> list[LearnerProfile]:
    """Cartesian product of levels, demographics copied from ``base``.

    Profile ids are derived from the base id plus a level suffix so every
    expanded profile is individually addressable.
    """
    if not knowledge_levels or not motivation_levels:
        raise EmptyGridError("knowledge and motivation level lists must be non-empty")
    profiles = []
    for knowledge, motivation in itertools.product(knowledge_levels, motivation_levels):
        suffix = f"k{'h' if knowledge is Level.HIGH else 'l'}-m{'h' if motivation is Level.HIGH else 'l'}"
        profiles.append(
            base.model_copy(
                update={
                    "id": f"{base.id}-{suffix}",
                    "knowledge": knowledge,
                    "motivation": motivation,
                }
            )
        )
    return profiles
