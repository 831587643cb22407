"""The learner, teacher and evaluator agents.

Each runner assembles its prompt from the shared templates, calls the
gateway, and parses the model output into a domain object. Output must
arrive as prose plus one fenced ```json block; parse or schema failures
trigger at most two repair turns that feed the error back to the model.
"""

from __future__ import annotations

import json
import re

from pydantic import ValidationError

from .errors import (
    ConstraintViolation,
    JsonParseError,
    MalformedAgentOutput,
    NoJsonBlockError,
    ScoreOutOfRange,
)
from .gateway import AgentRole, ChatMessage, ChatRole, Gateway
from .model import (
    BloomTier,
    Constraints,
    EvaluationReport,
    FacetModel,
    LearnerProfile,
    LearnerTranscript,
    RubricDimension,
    RubricScore,
    StarterTask,
    Worksheet,
    WorksheetTask,
    validate_worksheet,
)
from .templating import (
    GENDER_PHRASES,
    KNOWLEDGE_PHRASES,
    MOTIVATION_PHRASES,
    PromptTemplate,
    TemplateRole,
    inject_constraints,
    load_templates,
    render,
)

MAX_REPAIRS = 2

_JSON_BLOCK_RE = re.compile(r"```json[ \t]*\n(.*?)\n?```", re.DOTALL | re.IGNORECASE)


class StructuredOutputEnvelope(FacetModel):
    """Model output split into surrounding prose and the machine-readable
    payload of the last fenced json block."""

    prose: str = ""
    json_text: str

    @property
    def data(self) -> dict:
        return json.loads(self.json_text)


class DidacticalDirectives(FacetModel):
    """High-level instructional orientation handed to the teacher agent."""

    instructional_focus: str = (
        "Tasks build logically upon one another, following a clear progression "
        "from the concrete and known toward abstraction."
    )
    motivational_framework: str = (
        "Support autonomy and competence; personalized comments acknowledge the "
        "student's level of motivation."
    )
    task_selection_policy: str = (
        "Select only difficulty tiers that appropriately match the student's "
        "abilities; avoid tasks that are too easy or too difficult."
    )


def extract_envelope(raw: str) -> StructuredOutputEnvelope:
    """Locate the last fenced ```json block; byte content preserved."""
    matches = list(_JSON_BLOCK_RE.finditer(raw))
    if not matches:
        raise NoJsonBlockError("no fenced json block in model output")
    last = matches[-1]
    json_text = last.group(1)
    try:
        data = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise JsonParseError(exc.msg, position=exc.pos) from exc
    if not isinstance(data, dict):
        raise JsonParseError("top-level json value is not an object", position=0)
    prose = (raw[: last.start()] + raw[last.end() :]).strip()
    return StructuredOutputEnvelope(prose=prose, json_text=json_text)


# --- prompt assembly ----------------------------------------------------------
# Kept separate from the runners so the record/replay fixtures can be built
# against exactly the requests the pipeline will issue.


class _Prompts:
    _cache: dict | None = None

    @classmethod
    def get(cls, templates_dir=None) -> dict[TemplateRole, PromptTemplate]:
        if templates_dir is not None:
            return load_templates(templates_dir)
        if cls._cache is None:
            cls._cache = load_templates()
        return cls._cache


def learner_slots(profile: LearnerProfile) -> dict[str, str]:
    return {
        "age": str(profile.age if profile.age is not None else 10 + profile.grade),
        "gender": GENDER_PHRASES[profile.gender.value],
        "knowledgeDesc": KNOWLEDGE_PHRASES[profile.knowledge.value],
        "motivationDesc": MOTIVATION_PHRASES[profile.motivation.value],
    }


def profile_summary(profile: LearnerProfile) -> str:
    lines = [
        f"Grade {profile.grade} {profile.subject} student"
        + (f", {profile.age} years old" if profile.age is not None else ""),
        f"Mathematical knowledge: {profile.knowledge.value}",
        f"Intrinsic motivation: {profile.motivation.value}",
    ]
    if profile.interests:
        lines.append("Interests: " + ", ".join(profile.interests))
    if profile.notes:
        lines.append(f"Notes: {profile.notes}")
    return "\n".join(lines)


LEARNER_FORMAT_INSTRUCTION = """\
Work on the task, reflecting out loud as the student you are. Afterwards output exactly one fenced code block labeled json with this shape:

```json
{"solutionSteps": ["..."], "misconceptions": ["..."], "affectiveCues": ["..."], "finalAnswer": "..."}
```

solutionSteps, misconceptions and affectiveCues are arrays of strings; solutionSteps must not be empty. finalAnswer is a string or null."""

TEACHER_FORMAT_INSTRUCTION = """\
Write the complete worksheet as Markdown. Every task statement must appear verbatim in the Markdown. After the Markdown, output exactly one fenced code block labeled json with this shape:

```json
{"analysis": "...", "intro": "...", "tasks": [{"tier": "easy|medium|advanced", "statement": "...", "hints": ["..."], "scaffolds": ["..."], "motivationalComment": "..."}]}
```

analysis is your structured evaluation of the student's learning situation. intro is the personalized opening sentence. tier must be one of easy, medium, advanced."""

EVALUATOR_FORMAT_INSTRUCTION = """\
Output exactly one fenced code block labeled json with this shape:

```json
{"scores": [{"dimension": "didacticalStructure", "raw": 1, "justification": "..."}, {"dimension": "clarity", "raw": 1, "justification": "..."}, {"dimension": "creativity", "raw": 1, "justification": "..."}, {"dimension": "suitability", "raw": 1, "justification": "..."}], "diagnostics": "..."}
```

raw is the 1-6 score for that criteria (1 = best); give exactly one entry per dimension."""


def build_learner_messages(
    profile: LearnerProfile, task: StarterTask, templates_dir=None
) -> list[ChatMessage]:
    tpl = _Prompts.get(templates_dir)[TemplateRole.LEARNER]
    system = render(tpl, learner_slots(profile))
    user = f"{task.statement}\n\n{LEARNER_FORMAT_INSTRUCTION}"
    return [
        ChatMessage(role=ChatRole.SYSTEM, content=system),
        ChatMessage(role=ChatRole.USER, content=user),
    ]


def build_teacher_messages(
    profile: LearnerProfile,
    transcript: LearnerTranscript,
    directives: DidacticalDirectives,
    constraints: Constraints,
    templates_dir=None,
) -> list[ChatMessage]:
    tpl = _Prompts.get(templates_dir)[TemplateRole.TEACHER]
    system = render(
        tpl,
        {
            "instructionalFocus": directives.instructional_focus,
            "motivationalFramework": directives.motivational_framework,
            "taskSelectionPolicy": directives.task_selection_policy,
        },
    )
    system = inject_constraints(system, constraints)
    transcript_json = json.dumps(
        transcript.model_dump(by_alias=True, mode="json", exclude={"raw_text"}),
        indent=2,
        ensure_ascii=False,
    )
    user = (
        "Student profile:\n"
        f"{profile_summary(profile)}\n\n"
        "Transcript of the student working on the starter task:\n"
        f"{transcript_json}\n\n"
        f"{TEACHER_FORMAT_INSTRUCTION}"
    )
    return [
        ChatMessage(role=ChatRole.SYSTEM, content=system),
        ChatMessage(role=ChatRole.USER, content=user),
    ]


def build_evaluator_messages(
    worksheet: Worksheet,
    profile: LearnerProfile,
    baseline: str,
    templates_dir=None,
) -> list[ChatMessage]:
    tpl = _Prompts.get(templates_dir)[TemplateRole.EVALUATOR]
    system = render(tpl, {"baselineWorksheet": baseline})
    user = (
        "Student profile the worksheet was personalized for:\n"
        f"{profile_summary(profile)}\n\n"
        "Worksheet to evaluate:\n\n"
        f"{worksheet.markdown}\n\n"
        f"{EVALUATOR_FORMAT_INSTRUCTION}"
    )
    return [
        ChatMessage(role=ChatRole.SYSTEM, content=system),
        ChatMessage(role=ChatRole.USER, content=user),
    ]


# --- repair loop ----------------------------------------------------------------


def _exchange_with_repairs(gateway: Gateway, role: AgentRole, messages: list[ChatMessage], parse):
    """Call the model, re-prompting with the parse error up to MAX_REPAIRS
    times. ``parse`` maps raw output to a domain object or raises.

    Out-of-range rubric scores abort immediately (hard contract breach);
    a worksheet still constraint-invalid once repairs are exhausted raises
    ConstraintViolation, everything else MalformedAgentOutput.
    """
    last_error: Exception | None = None
    for _ in range(1 + MAX_REPAIRS):
        response = gateway.chat(role, messages)
        try:
            return parse(response.content)
        except ScoreOutOfRange:
            raise
        except (ValueError, ValidationError, NoJsonBlockError, JsonParseError, ConstraintViolation) as exc:
            last_error = exc
            messages = messages + [
                ChatMessage(role=ChatRole.ASSISTANT, content=response.content or "(empty)"),
                ChatMessage(
                    role=ChatRole.USER,
                    content=(
                        f"Your previous reply could not be used: {exc}. "
                        "Reply again and follow the required output format exactly."
                    ),
                ),
            ]
    if isinstance(last_error, ConstraintViolation):
        raise last_error
    raise MalformedAgentOutput(
        f"{role.value} output unusable after {MAX_REPAIRS} repair turns: {last_error}"
    )


# --- runners ---------------------------------------------------------------------


def run_learner(
    profile: LearnerProfile, task: StarterTask, gateway: Gateway, templates_dir=None
) -> LearnerTranscript:
    """Simulate the learner working the starter task; returns the transcript."""
    messages = build_learner_messages(profile, task, templates_dir)

    def parse(raw: str) -> LearnerTranscript:
        data = extract_envelope(raw).data
        return LearnerTranscript(
            solution_steps=data.get("solutionSteps") or [],
            misconceptions=data.get("misconceptions") or [],
            affective_cues=data.get("affectiveCues") or [],
            final_answer=_opt_str(data.get("finalAnswer")),
            raw_text=raw,
        )

    return _exchange_with_repairs(gateway, AgentRole.LEARNER, messages, parse)


def run_teacher(
    profile: LearnerProfile,
    transcript: LearnerTranscript,
    directives: DidacticalDirectives,
    constraints: Constraints,
    gateway: Gateway,
    templates_dir=None,
) -> Worksheet:
    """Produce the personalized one-page worksheet for the profile.

    The single prompt covers analysis of the transcript, personalization and
    Markdown output generation. The parsed worksheet must satisfy the hard
    constraints; a worksheet still invalid after the repair turns raises
    ConstraintViolation.
    """
    messages = build_teacher_messages(profile, transcript, directives, constraints, templates_dir)

    def parse(raw: str) -> Worksheet:
        envelope = extract_envelope(raw)
        data = envelope.data
        tasks = [
            WorksheetTask(
                index=i + 1,
                tier=BloomTier(item.get("tier", "")),
                statement=item.get("statement", ""),
                hints=item.get("hints") or [],
                scaffolds=item.get("scaffolds") or [],
                motivational_comment=_opt_str(item.get("motivationalComment")),
            )
            for i, item in enumerate(data.get("tasks") or [])
        ]
        markdown = envelope.prose
        ws = Worksheet(
            intro=data.get("intro", ""),
            tasks=tasks,
            profile_id=profile.id,
            markdown=markdown,
            word_count=len(markdown.split()),
        )
        violations = validate_worksheet(ws, constraints)
        if violations:
            raise ConstraintViolation(violations)
        return ws

    return _exchange_with_repairs(gateway, AgentRole.TEACHER, messages, parse)


def run_evaluator(
    worksheet: Worksheet,
    profile: LearnerProfile,
    baseline: str,
    gateway: Gateway,
    worksheet_ref: str = "",
    templates_dir=None,
) -> EvaluationReport:
    """Score the worksheet on the four rubric dimensions (raw scale, 1 = best)."""
    messages = build_evaluator_messages(worksheet, profile, baseline, templates_dir)

    def parse(raw: str) -> EvaluationReport:
        data = extract_envelope(raw).data
        scores = []
        for item in data.get("scores") or []:
            value = item.get("raw")
            if not isinstance(value, int) or isinstance(value, bool) or not 1 <= value <= 6:
                raise ScoreOutOfRange(value, context=f"{item.get('dimension')} score")
            scores.append(
                RubricScore(
                    dimension=RubricDimension(item.get("dimension", "")),
                    raw=value,
                    justification=item.get("justification", ""),
                )
            )
        return EvaluationReport(
            scores=scores,
            diagnostics=data.get("diagnostics", ""),
            worksheet_ref=worksheet_ref,
        )

    return _exchange_with_repairs(gateway, AgentRole.EVALUATOR, messages, parse)


def _opt_str(value) -> str | None:
    if value is None:
        return None
    return str(value)
