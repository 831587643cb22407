"""Envelope extraction, agent runners, repair bounds, prompt goldens."""

import json

import pytest

from conftest import ScriptedBackend
from facet.agents import (
    DidacticalDirectives,
    build_evaluator_messages,
    build_learner_messages,
    build_teacher_messages,
    extract_envelope,
    run_evaluator,
    run_learner,
    run_teacher,
)
from facet.errors import (
    ConstraintViolation,
    JsonParseError,
    MalformedAgentOutput,
    NoJsonBlockError,
    ScoreOutOfRange,
)
from facet.fixtures import (
    learner_response,
    sample_base_profile,
    sample_digit_task,
    teacher_response,
)
from facet.gateway import Gateway, Temperatures
from facet.model import Constraints, Level, RubricDimension
from facet.templating import default_baseline_worksheet


def make_gateway(contents):
    backend = ScriptedBackend(contents)
    return Gateway(backend, temperatures=Temperatures()), backend


def low_high_profile():
    return sample_base_profile().model_copy(
        update={"knowledge": Level.LOW, "motivation": Level.HIGH}
    )


def valid_transcript_json(answer="18"):
    return (
        "Thinking...\n\n```json\n"
        + json.dumps(
            {
                "solutionSteps": ["step one", "step two"],
                "misconceptions": [],
                "affectiveCues": ["feeling confident"],
                "finalAnswer": answer,
            }
        )
        + "\n```"
    )


def worksheet_json(n_tasks=3, tier="easy", statements_in_markdown=True, intro="Hello learner!"):
    tasks = [
        {"tier": tier, "statement": f"Exercise {i + 1}?", "hints": [], "scaffolds": [],
         "motivationalComment": None}
        for i in range(n_tasks)
    ]
    body = [intro] + ([t["statement"] for t in tasks] if statements_in_markdown else [])
    markdown = "\n\n".join(body)
    payload = {"analysis": "does fine", "intro": intro, "tasks": tasks}
    return markdown + "\n\n```json\n" + json.dumps(payload) + "\n```"


def evaluator_json(raws=(2, 1, 2, 1)):
    scores = [
        {"dimension": d.value, "raw": r, "justification": "because"}
        for d, r in zip(RubricDimension, raws)
    ]
    return "```json\n" + json.dumps({"scores": scores, "diagnostics": "solid"}) + "\n```"


class TestExtractEnvelope:
    def test_single_block(self):
        env = extract_envelope('before\n```json\n{"a": 1}\n```\nafter')
        assert env.data == {"a": 1}
        assert "before" in env.prose and "after" in env.prose

    def test_last_block_wins(self):
        raw = '```json\n{"first": 1}\n```\nmiddle\n```json\n{"second": 2}\n```'
        assert extract_envelope(raw).data == {"second": 2}

    def test_no_block(self):
        with pytest.raises(NoJsonBlockError):
            extract_envelope("no fenced block at all")

    def test_parse_error_carries_position(self):
        with pytest.raises(JsonParseError) as err:
            extract_envelope('```json\n{"a": }\n```')
        assert err.value.position > 0

    def test_non_object_rejected(self):
        with pytest.raises(JsonParseError):
            extract_envelope("```json\n[1, 2]\n```")

    def test_byte_content_preserved(self):
        env = extract_envelope('```json\n{"a":  1}\n```')
        assert env.json_text == '{"a":  1}'


class TestRunLearner:
    def test_canned_content_passthrough(self):
        gw, backend = make_gateway([valid_transcript_json()])
        transcript = run_learner(low_high_profile(), sample_digit_task(), gw)
        assert transcript.solution_steps == ["step one", "step two"]
        assert transcript.affective_cues == ["feeling confident"]
        assert transcript.final_answer == "18"
        assert transcript.raw_text == valid_transcript_json()
        assert backend.call_count == 1

    def test_fixture_content_parses(self):
        profile = low_high_profile()
        gw, _ = make_gateway([learner_response(profile)])
        transcript = run_learner(profile, sample_digit_task(), gw)
        assert len(transcript.solution_steps) >= 1
        assert len(transcript.affective_cues) >= 1

    def test_repair_then_success(self):
        gw, backend = make_gateway(["not json", valid_transcript_json()])
        transcript = run_learner(low_high_profile(), sample_digit_task(), gw)
        assert transcript.final_answer == "18"
        assert backend.call_count == 2
        # repair turn feeds the error back
        repair_messages = backend.requests[1].messages
        assert repair_messages[-2].role.value == "assistant"
        assert "could not be used" in repair_messages[-1].content

    def test_exhausted_repairs(self):
        gw, backend = make_gateway([""])
        with pytest.raises(MalformedAgentOutput):
            run_learner(low_high_profile(), sample_digit_task(), gw)
        assert backend.call_count == 3  # initial + 2 repairs

    def test_empty_steps_trigger_repair(self):
        bad = '```json\n{"solutionSteps": [], "misconceptions": [], "affectiveCues": []}\n```'
        gw, backend = make_gateway([bad])
        with pytest.raises(MalformedAgentOutput):
            run_learner(low_high_profile(), sample_digit_task(), gw)
        assert backend.call_count == 3


class TestRunTeacher:
    def run(self, gw, profile=None, constraints=None):
        profile = profile or low_high_profile()
        return run_teacher(
            profile,
            run_learner_transcript(),
            DidacticalDirectives(),
            constraints or Constraints(),
            gw,
        )

    def test_valid_worksheet(self):
        gw, backend = make_gateway([worksheet_json()])
        ws = self.run(gw)
        assert ws.intro == "Hello learner!"
        assert [t.index for t in ws.tasks] == [1, 2, 3]
        assert all(t.statement in ws.markdown for t in ws.tasks)
        assert backend.call_count == 1

    def test_fixture_content_tiers(self):
        profile = low_high_profile()
        gw, _ = make_gateway([teacher_response(profile)])
        ws = run_teacher(
            profile, run_learner_transcript(), DidacticalDirectives(), Constraints(), gw
        )
        assert {t.tier.value for t in ws.tasks} <= {"easy", "medium"}
        assert profile.interests[0] in ws.intro

    def test_unknown_tier_repairs_then_fails(self):
        gw, backend = make_gateway([worksheet_json(tier="expert")])
        with pytest.raises(MalformedAgentOutput):
            self.run(gw)
        assert backend.call_count == 3

    def test_too_many_tasks_constraint_violation(self):
        gw, backend = make_gateway([worksheet_json(n_tasks=6)])
        with pytest.raises(ConstraintViolation) as err:
            self.run(gw, constraints=Constraints(max_tasks=5))
        assert any("maxTasks" in v for v in err.value.violations)
        assert backend.call_count == 3

    def test_constraint_repair_can_recover(self):
        gw, backend = make_gateway([worksheet_json(n_tasks=6), worksheet_json(n_tasks=4)])
        ws = self.run(gw, constraints=Constraints(max_tasks=5))
        assert len(ws.tasks) == 4
        assert backend.call_count == 2


class TestRunEvaluator:
    def run(self, gw, profile=None):
        profile = profile or low_high_profile()
        gw2, _ = make_gateway([teacher_response(profile)])
        ws = run_teacher(
            profile, run_learner_transcript(), DidacticalDirectives(), Constraints(), gw2
        )
        return run_evaluator(ws, profile, default_baseline_worksheet(), gw, worksheet_ref="w1")

    def test_four_scores_in_range(self):
        gw, _ = make_gateway([evaluator_json()])
        report = self.run(gw)
        assert len(report.scores) == 4
        assert all(1 <= s.raw <= 6 for s in report.scores)
        assert report.worksheet_ref == "w1"

    def test_score_seven_rejected_immediately(self):
        gw, backend = make_gateway([evaluator_json(raws=(2, 7, 2, 1))])
        with pytest.raises(ScoreOutOfRange):
            self.run(gw)
        assert backend.call_count == 1

    def test_missing_dimension_exhausts_repairs(self):
        payload = {
            "scores": [
                {"dimension": d.value, "raw": 2, "justification": ""}
                for d in list(RubricDimension)[:3]
            ]
        }
        gw, backend = make_gateway(["```json\n" + json.dumps(payload) + "\n```"])
        with pytest.raises(MalformedAgentOutput):
            self.run(gw)
        assert backend.call_count == 3

    def test_inverted_view(self):
        gw, _ = make_gateway([evaluator_json(raws=(2, 1, 3, 1))])
        report = self.run(gw)
        inverted = report.inverted()
        assert inverted[RubricDimension.DIDACTICAL_STRUCTURE] == 5
        assert inverted[RubricDimension.CLARITY] == 6
        assert inverted[RubricDimension.CREATIVITY] == 4


class TestPromptGoldens:
    def test_learner_prompt_contains_source_text(self, goldens):
        profile = sample_base_profile()  # high/high, 15yo male
        messages = build_learner_messages(profile, sample_digit_task())
        assert goldens["learner_high_high"] in messages[0].content

    def test_teacher_prompt_contains_source_text(self, goldens):
        messages = build_teacher_messages(
            sample_base_profile(), run_learner_transcript(), DidacticalDirectives(), Constraints()
        )
        assert goldens["teacher"] in messages[0].content

    def test_teacher_prompt_carries_constraints(self):
        messages = build_teacher_messages(
            sample_base_profile(), run_learner_transcript(), DidacticalDirectives(),
            Constraints(min_tasks=3, max_tasks=5, word_budget=400),
        )
        assert "between 3 and 5 tasks" in messages[0].content

    def test_evaluator_prompt_corrected_criteria(self, goldens):
        messages = build_evaluator_messages(
            worksheet_stub(), sample_base_profile(), default_baseline_worksheet()
        )
        system = messages[0].content
        assert goldens["evaluator_corrected"] in system

    def test_evaluator_criteria_match_rubric_tables(self, goldens):
        messages = build_evaluator_messages(
            worksheet_stub(), sample_base_profile(), default_baseline_worksheet()
        )
        system = messages[0].content
        for block in goldens["rubric_descriptors"].values():
            assert block in system

    def test_evaluator_prompt_embeds_baseline_and_profile(self):
        baseline = default_baseline_worksheet()
        messages = build_evaluator_messages(worksheet_stub(), sample_base_profile(), baseline)
        assert baseline in messages[0].content
        assert "Intrinsic motivation: high" in messages[1].content

    def test_unspecified_gender_stays_grammatical(self):
        from facet.model import Gender

        profile = sample_base_profile().model_copy(update={"gender": Gender.UNSPECIFIED})
        system = build_learner_messages(profile, sample_digit_task())[0].content
        assert "You are a 15-year-old secondary-school student with" in system
        assert "unspecified" not in system


def run_learner_transcript():
    from facet.model import LearnerTranscript

    return LearnerTranscript(
        solution_steps=["tried 2 x 2 x 6", "got 24"],
        misconceptions=["forgets used digits"],
        affective_cues=["eager"],
        final_answer="24",
        raw_text="...",
    )


def worksheet_stub():
    from facet.model import BloomTier, Worksheet, WorksheetTask

    task = WorksheetTask(index=1, tier=BloomTier.EASY, statement="Count the options.")
    return Worksheet(
        intro="Hi!", tasks=[task], profile_id="p",
        markdown="Hi!\n\nCount the options.", word_count=5,
    )
