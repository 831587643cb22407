"""facet: individualized worksheet generation with built-in evaluation."""

__version__ = "0.1.0"

from .errors import FacetError
from .model import (
    BloomTier,
    Constraints,
    EvaluationReport,
    Gender,
    LearnerProfile,
    LearnerTranscript,
    Level,
    RubricDimension,
    RubricScore,
    StarterTask,
    TeacherRating,
    Worksheet,
    WorksheetTask,
    expand_profile_grid,
    invert_score,
    validate_worksheet,
)

__all__ = [
    "BloomTier",
    "Constraints",
    "EvaluationReport",
    "FacetError",
    "Gender",
    "LearnerProfile",
    "LearnerTranscript",
    "Level",
    "RubricDimension",
    "RubricScore",
    "StarterTask",
    "TeacherRating",
    "Worksheet",
    "WorksheetTask",
    "expand_profile_grid",
    "invert_score",
    "validate_worksheet",
    "__version__",
]
