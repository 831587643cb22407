"""Core domain types, score inversion, grid expansion, worksheet validation."""

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st
from pydantic import ValidationError

from facet.errors import EmptyGridError, ScoreOutOfRange
from facet.model import (
    BloomTier,
    Constraints,
    EvaluationReport,
    Gender,
    LearnerProfile,
    Level,
    RubricDimension,
    RubricScore,
    StarterTask,
    TeacherRating,
    Worksheet,
    WorksheetTask,
    canonical_json,
    expand_profile_grid,
    invert_score,
    validate_worksheet,
)


def make_worksheet(n_tasks=3, words=350, intro="Welcome to fractions!", with_statements=True):
    tasks = [
        WorksheetTask(index=i + 1, tier=BloomTier.EASY, statement=f"Solve exercise {i + 1}.")
        for i in range(n_tasks)
    ]
    body_parts = [intro] + ([t.statement for t in tasks] if with_statements else [])
    markdown = "\n\n".join(body_parts)
    return Worksheet(
        intro=intro,
        tasks=tasks,
        profile_id="p1",
        markdown=markdown,
        word_count=words,
    )


class TestInvertScore:
    def test_endpoints_and_midpoint(self):
        assert invert_score(1) == 6
        assert invert_score(6) == 1
        assert invert_score(3) == 4

    @pytest.mark.parametrize("bad", [0, 7, -1, 100])
    def test_out_of_range(self, bad):
        with pytest.raises(ScoreOutOfRange):
            invert_score(bad)

    @given(st.integers(min_value=1, max_value=6))
    def test_involution(self, s):
        assert invert_score(invert_score(s)) == s


class TestValidateWorksheet:
    def test_valid_worksheet_ok(self):
        ws = make_worksheet(n_tasks=3, words=350)
        assert validate_worksheet(ws, Constraints(max_tasks=5, word_budget=400)) == []

    def test_zero_tasks(self):
        ws = make_worksheet(n_tasks=0)
        violations = validate_worksheet(ws, Constraints())
        assert "tasks.length < 1" in violations

    def test_word_budget_boundary(self):
        ws = make_worksheet(words=401)
        violations = validate_worksheet(ws, Constraints(word_budget=400))
        assert any(v.startswith("wordCount exceeds budget") for v in violations)
        ok = make_worksheet(words=400)
        assert validate_worksheet(ok, Constraints(word_budget=400)) == []

    def test_statement_missing_from_markdown(self):
        ws = make_worksheet(with_statements=False)
        violations = validate_worksheet(ws, Constraints())
        assert sum("markdown missing task" in v for v in violations) == 3

    def test_every_violation_reported(self):
        # empty intro + too many tasks + over budget + missing statements
        tasks = [
            WorksheetTask(index=i + 1, tier=BloomTier.MEDIUM, statement=f"Task {i}?")
            for i in range(6)
        ]
        ws = Worksheet(intro=" ", tasks=tasks, profile_id="p", markdown="nothing", word_count=999)
        violations = validate_worksheet(ws, Constraints(min_tasks=3, max_tasks=5, word_budget=400))
        assert any("intro" in v for v in violations)
        assert any("maxTasks" in v for v in violations)
        assert any("wordCount" in v for v in violations)
        assert sum("markdown missing" in v for v in violations) == 6

    def test_non_consecutive_indices(self):
        tasks = [
            WorksheetTask(index=1, tier=BloomTier.EASY, statement="A?"),
            WorksheetTask(index=3, tier=BloomTier.EASY, statement="B?"),
        ]
        ws = Worksheet(intro="Hi", tasks=tasks, profile_id="p", markdown="A?\nB?", word_count=4)
        assert "task indices not consecutive from 1" in validate_worksheet(ws, Constraints())

    @given(
        n_tasks=st.integers(min_value=0, max_value=7),
        words=st.integers(min_value=0, max_value=600),
        drop_statements=st.booleans(),
    )
    def test_ok_implies_containment(self, n_tasks, words, drop_statements):
        ws = make_worksheet(n_tasks=n_tasks, words=words, with_statements=not drop_statements)
        cfg = Constraints(max_tasks=5, word_budget=400)
        if validate_worksheet(ws, cfg) == []:
            assert all(t.statement in ws.markdown for t in ws.tasks)
            assert 1 <= len(ws.tasks) <= cfg.max_tasks
            assert ws.word_count <= cfg.word_budget


class TestExpandProfileGrid:
    def test_four_profiles(self, base_profile):
        grid = expand_profile_grid([Level.LOW, Level.HIGH], [Level.LOW, Level.HIGH], base_profile)
        assert [p.label for p in grid] == ["K_L M_L", "K_L M_H", "K_H M_L", "K_H M_H"]

    def test_singleton(self, base_profile):
        grid = expand_profile_grid([Level.HIGH], [Level.HIGH], base_profile)
        assert len(grid) == 1
        assert grid[0].knowledge is Level.HIGH

    def test_empty_levels(self, base_profile):
        with pytest.raises(EmptyGridError):
            expand_profile_grid([Level.LOW, Level.HIGH], [], base_profile)

    @given(
        ks=st.lists(st.sampled_from(list(Level)), min_size=1, max_size=2, unique=True),
        ms=st.lists(st.sampled_from(list(Level)), min_size=1, max_size=2, unique=True),
    )
    def test_cardinality_and_demographics(self, ks, ms):
        base = LearnerProfile(
            id="b", knowledge=Level.LOW, motivation=Level.LOW, age=14,
            gender=Gender.FEMALE, grade=8, interests=["chess"],
        )
        grid = expand_profile_grid(ks, ms, base)
        assert len(grid) == len(ks) * len(ms)
        pairs = [(p.knowledge, p.motivation) for p in grid]
        assert len(set(pairs)) == len(pairs)
        for p in grid:
            assert (p.age, p.gender, p.grade, p.subject, p.interests) == (
                base.age, base.gender, base.grade, base.subject, base.interests,
            )


class TestTypeInvariants:
    def test_profile_grade_bound(self):
        with pytest.raises(ValidationError):
            LearnerProfile(id="x", knowledge=Level.LOW, motivation=Level.LOW, grade=0)

    def test_profile_age_bound(self):
        with pytest.raises(ValidationError):
            LearnerProfile(id="x", knowledge=Level.LOW, motivation=Level.LOW, grade=8, age=0)

    def test_task_statement_non_empty(self):
        with pytest.raises(ValidationError):
            StarterTask(id="t", grade=8, topic="x", statement="   ")

    def test_rating_score_zero_rejected(self):
        scores = {d: 4 for d in RubricDimension}
        scores[RubricDimension.CLARITY] = 0
        with pytest.raises(ValidationError):
            TeacherRating(rater_id="r1", worksheet_ref="w", scores=scores)

    def test_rating_missing_dimension_rejected(self):
        scores = {d: 4 for d in list(RubricDimension)[:3]}
        with pytest.raises(ValidationError):
            TeacherRating(rater_id="r1", worksheet_ref="w", scores=scores)

    def test_report_requires_all_dimensions(self):
        scores = [RubricScore(dimension=d, raw=2) for d in list(RubricDimension)[:3]]
        with pytest.raises(ValidationError):
            EvaluationReport(scores=scores, worksheet_ref="w")

    def test_report_rejects_duplicates(self):
        scores = [RubricScore(dimension=RubricDimension.CLARITY, raw=2)] * 4
        with pytest.raises(ValidationError):
            EvaluationReport(scores=scores, worksheet_ref="w")

    @given(st.lists(st.integers(min_value=1, max_value=6), min_size=4, max_size=4))
    def test_report_four_dimensional_in_scale(self, raws):
        scores = [
            RubricScore(dimension=d, raw=r) for d, r in zip(RubricDimension, raws)
        ]
        report = EvaluationReport(scores=scores, worksheet_ref="w")
        assert len(report.scores) == 4
        assert {s.dimension for s in report.scores} == set(RubricDimension)
        assert all(1 <= s.raw <= 6 for s in report.scores)
        inverted = report.inverted()
        assert all(1 <= v <= 6 for v in inverted.values())

    def test_constraints_invariants(self):
        with pytest.raises(ValidationError):
            Constraints(min_tasks=5, max_tasks=3)
        with pytest.raises(ValidationError):
            Constraints(word_budget=10)
        with pytest.raises(ValidationError):
            Constraints(page_limit=2)


class TestCanonicalJson:
    def test_camel_case_field_names(self, base_profile, digit_task):
        data = json.loads(canonical_json(digit_task))
        assert "answerKey" in data
        ws = make_worksheet()
        data = json.loads(canonical_json(ws))
        assert set(data) >= {"intro", "tasks", "profileId", "markdown", "wordCount"}

    def test_enum_values_lowercase(self, base_profile):
        data = json.loads(canonical_json(base_profile))
        assert data["knowledge"] == "high"
        assert data["gender"] == "male"

    def test_roundtrip_byte_identical(self, base_profile):
        text = canonical_json(base_profile)
        again = canonical_json(LearnerProfile.model_validate_json(text))
        assert text == again

    def test_sorted_keys(self):
        text = canonical_json({"b": 1, "a": 2})
        assert text.index('"a"') < text.index('"b"')
