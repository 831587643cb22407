"""Reusable prompt templates with {{slot}} filling and constraint injection.

Templates are UTF-8 text files with a small front-matter header::

    id: learner
    role: learner
    requiredSlots: age, gender, knowledgeDesc, motivationDesc
    ---
    <body with {{slots}}>

The shipped defaults live in ``facet/templates`` and reproduce the prompt
texts the agents were validated with; an alternative directory can be given
at load time.
"""

from __future__ import annotations

import re
from enum import Enum
from importlib import resources
from pathlib import Path

from pydantic import field_validator, model_validator

from .errors import (
    MissingSlotError,
    TemplateSyntaxError,
    UnknownSlotError,
)
from .model import Constraints, FacetModel

SlotMap = dict[str, str]

_SLOT_RE = re.compile(r"\{\{\s*([A-Za-z0-9_]+)\s*\}\}")

CONSTRAINT_CLAUSE_HEADER = "Hard constraints:"

# knowledge / motivation slot phrases; the high/high pair renders the persona
# line the agents were validated against, the low phrases are parallel
# constructions.
KNOWLEDGE_PHRASES = {
    "high": "above-average mathematical performance",
    "low": "below-average mathematical performance",
}
MOTIVATION_PHRASES = {
    "high": "strong motivation to learn",
    "low": "little motivation to learn",
}
GENDER_PHRASES = {
    "male": "male",
    "female": "female",
    # keeps the persona sentence grammatical without asserting a gender
    "unspecified": "secondary-school",
}


class TemplateRole(str, Enum):
    LEARNER = "learner"
    TEACHER = "teacher"
    EVALUATOR = "evaluator"


def list_slots(body: str) -> list[str]:
    """Distinct slot names in order of first appearance.

    Raises TemplateSyntaxError when a ``{{`` marker is never closed or a
    stray ``}}`` appears outside a slot.
    """
    cleaned = _SLOT_RE.sub("", body)
    if "{{" in cleaned or "}}" in cleaned:
        raise TemplateSyntaxError("unbalanced {{ }} marker in template body")
    seen: list[str] = []
    for match in _SLOT_RE.finditer(body):
        name = match.group(1)
        if name not in seen:
            seen.append(name)
    return seen


class PromptTemplate(FacetModel):
    id: str
    role: TemplateRole
    body: str
    required_slots: list[str]

    @field_validator("body")
    @classmethod
    def _body_non_empty(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("template body must be non-empty")
        return v

    @model_validator(mode="after")
    def _slots_declared(self) -> "PromptTemplate":
        undeclared = [s for s in list_slots(self.body) if s not in self.required_slots]
        if undeclared:
            raise ValueError(f"slots in body not declared as required: {undeclared}")
        return self

    @property
    def slots(self) -> list[str]:
        return list_slots(self.body)


def render(tpl: PromptTemplate, slots: SlotMap) -> str:
    """Fill every slot; rejects missing required slots and unknown entries."""
    body_slots = set(list_slots(tpl.body))
    for name in tpl.required_slots:
        if name not in slots or not str(slots[name]):
            raise MissingSlotError(name)
    for name in slots:
        if name not in body_slots and name not in tpl.required_slots:
            raise UnknownSlotError(name)
    return _SLOT_RE.sub(lambda m: str(slots[m.group(1)]), tpl.body)


def constraint_clause(c: Constraints) -> str:
    lines = [
        CONSTRAINT_CLAUSE_HEADER,
        f"- Create between {c.min_tasks} and {c.max_tasks} tasks.",
        f"- The whole worksheet must contain at most {c.word_budget} words.",
        f"- The worksheet must fit on {c.page_limit} page.",
    ]
    return "\n".join(lines)


def inject_constraints(prompt: str, c: Constraints) -> str:
    """Append the hard-constraint clause; replaces any previous clause so
    re-injection never duplicates."""
    marker = prompt.find(CONSTRAINT_CLAUSE_HEADER)
    if marker != -1:
        prompt = prompt[:marker].rstrip("\n")
    return prompt.rstrip("\n") + "\n\n" + constraint_clause(c) + "\n"


# --- template files -----------------------------------------------------------


def parse_template_file(text: str, fallback_id: str = "") -> PromptTemplate:
    if "\n---\n" not in text:
        raise TemplateSyntaxError("template file missing front-matter '---' separator")
    header, body = text.split("\n---\n", 1)
    meta: dict[str, str] = {}
    for line in header.splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition(":")
        meta[key.strip()] = value.strip()
    required = [s.strip() for s in meta.get("requiredSlots", "").split(",") if s.strip()]
    return PromptTemplate(
        id=meta.get("id", fallback_id),
        role=TemplateRole(meta["role"]),
        body=body,
        required_slots=required,
    )


def load_templates(directory: str | Path | None = None) -> dict[TemplateRole, PromptTemplate]:
    """Load one template per agent role from ``directory`` (default: shipped)."""
    if directory is None:
        root = resources.files("facet").joinpath("templates")
    else:
        root = Path(directory)
    templates: dict[TemplateRole, PromptTemplate] = {}
    for role in TemplateRole:
        text = root.joinpath(f"{role.value}.txt").read_text(encoding="utf-8")
        templates[role] = parse_template_file(text, fallback_id=role.value)
    return templates


def default_baseline_worksheet() -> str:
    """The generic, non-adaptive sheet used as the evaluator's average anchor."""
    return (
        resources.files("facet")
        .joinpath("templates/baseline_worksheet.md")
        .read_text(encoding="utf-8")
    )
