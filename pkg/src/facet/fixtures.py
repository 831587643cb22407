"""Frozen demo fixtures: sample profiles, the digit starter task, and a
fully recorded replay store covering the 2x2 profile grid.

The canned agent responses are authored (schema-verified by actually running
the pipeline over them while recording), and the evaluator responses replay
the shipped 10-iteration reference scores, so a ``bench --grid
--iterations 10`` over these fixtures reproduces the reference stability
table without any network access.

Run ``python -m facet.fixtures OUTDIR`` to materialize a demo directory with
``config.json``, ``profile.json``, ``task.json`` and the replay store.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from .agents import build_evaluator_messages
from .gateway import (
    AgentRole,
    ChatRequest,
    ChatResponse,
    Gateway,
    RecordingBackend,
    route_model,
    write_fixture,
)
from .harness import load_reference_iterations
from .model import (
    Gender,
    LearnerProfile,
    Level,
    RubricDimension,
    StarterTask,
    expand_profile_grid,
)
from .pipeline import PipelineConfig, run_pipeline

DIGIT_TASK_STATEMENT = (
    "Using the digits 1, 2, 3, 4, and 5, form four-digit numbers where no digit "
    "is repeated. The first digit of the number must be greater than 3, and the "
    "second digit must be even. How many different four-digit numbers can be "
    "created with these restrictions?"
)

# reference worksheet column backing each profile's evaluator score sequence
_WORKSHEET_FOR_LEVELS = {
    (Level.HIGH, Level.HIGH): 1,
    (Level.HIGH, Level.LOW): 2,
    (Level.LOW, Level.HIGH): 3,
    (Level.LOW, Level.LOW): 4,
}

_JUSTIFICATIONS = {
    RubricDimension.DIDACTICAL_STRUCTURE: "Tasks progress from concrete recall toward transfer with transparent goals.",
    RubricDimension.CLARITY: "Instructions are short, unambiguous and appropriate for the grade level.",
    RubricDimension.CREATIVITY: "Familiar context reused in an engaging way, though the framing stays conventional.",
    RubricDimension.SUITABILITY: "Difficulty and support match the stated knowledge and motivation profile.",
}


def sample_base_profile() -> LearnerProfile:
    return LearnerProfile(
        id="student-a",
        knowledge=Level.HIGH,
        motivation=Level.HIGH,
        age=15,
        gender=Gender.MALE,
        grade=8,
        subject="mathematics",
        interests=["football", "video games"],
    )


def sample_digit_task(grade: int = 8) -> StarterTask:
    return StarterTask(
        id="digits-0001",
        grade=grade,
        topic="combinatorics",
        statement=DIGIT_TASK_STATEMENT,
        answer_key="18",
    )


def grid_profiles() -> list[LearnerProfile]:
    return expand_profile_grid(
        [Level.LOW, Level.HIGH], [Level.LOW, Level.HIGH], sample_base_profile()
    )


# --- authored agent responses ---------------------------------------------------


def learner_response(profile: LearnerProfile) -> str:
    if profile.knowledge is Level.HIGH:
        steps = [
            "The first digit must be greater than 3, so it is 4 or 5.",
            "If the first digit is 4, the second digit must be even and unused, so it is 2; the last two positions take 2 of the remaining 3 digits: 3 x 2 = 6 numbers.",
            "If the first digit is 5, the second digit is 2 or 4; for each, the last two positions give 3 x 2 = 6 numbers, so 12.",
            "6 + 12 = 18 possible numbers.",
        ]
        misconceptions = []
        answer = "18"
    else:
        steps = [
            "The first digit has to be bigger than 3, so I can pick 4 or 5. That is 2 choices.",
            "The second digit has to be even, so 2 or 4. I think that is always 2 choices.",
            "For the last two digits I multiply the digits that are left: 3 x 2 = 6.",
            "So I compute 2 x 2 x 6 = 24 numbers.",
        ]
        misconceptions = [
            "Counts the even second digit as 2 choices even when the 4 was already used as first digit."
        ]
        answer = "24"
    if profile.motivation is Level.HIGH:
        cues = [
            "I like puzzles like this, it feels like cracking a code.",
            "I want to double-check my counting to be sure.",
        ]
    else:
        cues = [
            "This looks like a lot of cases, I hope it is over quickly.",
            "I am not sure counting problems are my thing.",
        ]
    payload = {
        "solutionSteps": steps,
        "misconceptions": misconceptions,
        "affectiveCues": cues,
        "finalAnswer": answer,
    }
    prose = "Okay, let me work through this step by step.\n\n" + "\n".join(
        f"{i + 1}. {s}" for i, s in enumerate(steps)
    )
    return prose + "\n\n```json\n" + json.dumps(payload, indent=2) + "\n```\n"


def teacher_response(profile: LearnerProfile) -> str:
    interest = profile.interests[0] if profile.interests else "everyday life"
    if profile.knowledge is Level.LOW:
        intro = (
            f"Imagine you are picking jersey numbers for your {interest} team: today "
            "you will count how many line-ups are possible, one careful step at a time."
        )
        tasks = [
            {
                "tier": "easy",
                "statement": "List all two-digit numbers you can form from the digits 1, 2 and 3 without repeating a digit.",
                "hints": ["Start with 1 as the first digit, then try 2, then 3."],
                "scaffolds": ["Use a table with one row per first digit."],
                "motivationalComment": "A list you can see is a great start.",
            },
            {
                "tier": "easy",
                "statement": "Using the digits 1, 2, 3 and 4, how many two-digit numbers with no repeated digit have an even second digit?",
                "hints": ["Pick the second digit first: which digits are even?"],
                "scaffolds": ["Check each choice against the digits that are still free."],
                "motivationalComment": "Notice how choosing the restricted position first keeps things simple.",
            },
            {
                "tier": "medium",
                "statement": "Using the digits 1, 2, 3, 4, and 5, form three-digit numbers with no repeated digit where the first digit is greater than 3. How many are possible?",
                "hints": ["Split into the case first digit 4 and first digit 5."],
                "scaffolds": ["Count the remaining choices position by position."],
                "motivationalComment": "This is the same idea as the starter task, just one digit shorter.",
            },
        ]
        if profile.motivation is Level.HIGH:
            tasks.append(
                {
                    "tier": "medium",
                    "statement": "Return to the starter task: using the digits 1 to 5, how many four-digit numbers with no repeated digit have a first digit greater than 3 and an even second digit? Check your earlier answer.",
                    "hints": ["Be careful: if 4 is the first digit, it is no longer available as the second."],
                    "scaffolds": [],
                    "motivationalComment": "You wanted to double-check your counting; this is the moment.",
                }
            )
        analysis = (
            "The transcript shows procedural fluency with single-position counting but a "
            "systematic overcount: used digits are not removed from later choices. The "
            "student is performing below average for grade 8 combinatorics; supportive "
            "scaffolding and case tables are indicated."
        )
    else:
        intro = (
            f"Since you enjoy {interest} and like cracking codes, today's sheet pushes "
            "your counting strategies from quick wins to general arguments."
        )
        tasks = [
            {
                "tier": "medium",
                "statement": "Using the digits 1, 2, 3, 4, and 5 with no digit repeated, how many four-digit numbers have an odd first digit and an even second digit?",
                "hints": [],
                "scaffolds": ["Case split on the first digit."],
                "motivationalComment": None,
            },
            {
                "tier": "medium",
                "statement": "How many four-digit numbers from the digits 1 to 5 with no repeated digit are divisible by 5?",
                "hints": ["Which digit must be last?"],
                "scaffolds": [],
                "motivationalComment": None,
            },
            {
                "tier": "advanced",
                "statement": "Explain in general: for n distinct digits, how many k-digit arrangements exist, and how does a restriction on one position change the count? Justify your formula.",
                "hints": [],
                "scaffolds": [],
                "motivationalComment": "A clean argument here is worth more than the number itself.",
            },
        ]
        if profile.motivation is Level.HIGH:
            tasks.append(
                {
                    "tier": "advanced",
                    "statement": "Design your own restriction for the digits 1 to 5 so that exactly 12 four-digit numbers with no repeated digit satisfy it, and prove the count.",
                    "hints": [],
                    "scaffolds": [],
                    "motivationalComment": "Inventing the puzzle is the best way to own the method.",
                }
            )
        analysis = (
            "The transcript shows a correct case split and accurate counts; the student is "
            "performing above average for grade 8. Extension toward justification and "
            "generalization is appropriate; heavy scaffolding would under-challenge."
        )

    lines = [f"# Worksheet: Counting with digits", "", intro, ""]
    for i, task in enumerate(tasks, start=1):
        lines.append(f"## Task {i} ({task['tier']})")
        lines.append("")
        lines.append(task["statement"])
        if task["hints"]:
            lines.append("")
            lines.extend(f"*Hint: {h}*" for h in task["hints"])
        if task["motivationalComment"]:
            lines.append("")
            lines.append(f"> {task['motivationalComment']}")
        lines.append("")
    markdown = "\n".join(lines).rstrip() + "\n"
    payload = {"analysis": analysis, "intro": intro, "tasks": tasks}
    return markdown + "\n```json\n" + json.dumps(payload, indent=2, ensure_ascii=False) + "\n```\n"


def evaluator_response(inverted_by_dimension: dict[RubricDimension, int]) -> str:
    scores = [
        {
            "dimension": dim.value,
            "raw": 7 - inverted_by_dimension[dim],
            "justification": _JUSTIFICATIONS[dim],
        }
        for dim in RubricDimension
    ]
    payload = {
        "scores": scores,
        "diagnostics": (
            "Structure and difficulty track the stated profile; keep statements short "
            "and keep the personalized opening."
        ),
    }
    return "```json\n" + json.dumps(payload, indent=2) + "\n```\n"


def evaluator_sequence(profile: LearnerProfile) -> list[str]:
    """Ten evaluator replies whose inverted scores replay the reference
    iteration column assigned to this profile."""
    reference = load_reference_iterations()
    column = reference[_WORKSHEET_FOR_LEVELS[(profile.knowledge, profile.motivation)]]
    return [
        evaluator_response({dim: column[dim][i] for dim in RubricDimension})
        for i in range(len(column[RubricDimension.CLARITY]))
    ]


# --- recording ---------------------------------------------------------------------


class _ScriptedBackend:
    """Plays back an ordered list of response bodies; test plumbing only."""

    def __init__(self, contents: list[str]):
        self.contents = list(contents)
        self.sent: list[ChatRequest] = []

    def send(self, req: ChatRequest, timeout: float) -> ChatResponse:
        content = self.contents[min(len(self.sent), len(self.contents) - 1)]
        self.sent.append(req)
        return ChatResponse(content=content, model_id=req.model_id)


def record_grid_fixtures(
    replay_dir: str | Path,
    cfg: PipelineConfig | None = None,
    max_tokens: int = 1024,
    iterations: int = 10,
) -> list[LearnerProfile]:
    """Record replay fixtures for every grid profile against the digit task.

    Each profile gets single-response learner/teacher fixtures and an
    evaluator fixture carrying the per-iteration response sequence.
    """
    cfg = cfg or PipelineConfig()
    task = sample_digit_task()
    profiles = grid_profiles()
    for profile in profiles:
        sequence = evaluator_sequence(profile)[:iterations]
        scripted = _ScriptedBackend(
            [learner_response(profile), teacher_response(profile), sequence[0]]
        )
        recorder = RecordingBackend(scripted, replay_dir)
        gateway = Gateway(
            recorder, routing=cfg.routing, temperatures=cfg.temperatures, max_tokens=max_tokens
        )
        record = run_pipeline(profile, task, cfg, gateway)
        if record.status != "succeeded":
            raise RuntimeError(
                f"fixture recording failed at {record.failure.stage}: {record.failure.error}"
            )
        # replace the single evaluator response with the full sequence
        evaluator_request = ChatRequest(
            model_id=route_model(AgentRole.EVALUATOR, cfg.routing),
            messages=build_evaluator_messages(
                record.worksheet, profile, cfg.resolve_baseline(), cfg.templates_dir
            ),
            temperature=cfg.temperatures.evaluator,
            max_tokens=max_tokens,
        )
        write_fixture(replay_dir, evaluator_request, *sequence)
    return profiles


def materialize_demo(target: str | Path) -> Path:
    """Create a self-contained demo directory: config, inputs, replay store."""
    target = Path(target)
    target.mkdir(parents=True, exist_ok=True)
    cfg = PipelineConfig()
    profiles = record_grid_fixtures(target / "replay", cfg)

    demo_profile = next(
        p for p in profiles if p.knowledge is Level.LOW and p.motivation is Level.HIGH
    )
    (target / "profile.json").write_text(
        demo_profile.model_dump_json(by_alias=True, indent=2) + "\n", encoding="utf-8"
    )
    (target / "task.json").write_text(
        sample_digit_task().model_dump_json(by_alias=True, indent=2) + "\n", encoding="utf-8"
    )
    config = {
        "backend": "replay",
        "replayDir": "replay",
        "storeDir": "store",
    }
    (target / "config.json").write_text(
        json.dumps(config, indent=2) + "\n", encoding="utf-8"
    )
    return target


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: python -m facet.fixtures OUTDIR", file=sys.stderr)
        return 2
    target = materialize_demo(argv[0])
    print(f"demo fixtures written to {target}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
