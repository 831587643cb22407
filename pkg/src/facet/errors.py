"""Exception hierarchy shared across the engine.

Every error that is part of an operation contract lives here so callers can
catch one family per subsystem (template, gateway, agent, store) or the root
``FacetError``.
"""

from __future__ import annotations


class FacetError(Exception):
    """Root of all engine-specific errors."""


# --- core model -------------------------------------------------------------


class ScoreOutOfRange(FacetError, ValueError):
    """A rubric score fell outside the 1..6 scale."""

    def __init__(self, value: int, context: str = "score"):
        self.value = value
        super().__init__(f"{context} {value} outside the 1..6 scale")


class EmptyGridError(FacetError, ValueError):
    """Profile grid expansion was asked to iterate an empty level list."""


class GradeMismatchError(FacetError, ValueError):
    """Starter task grade does not match the learner profile grade."""


# --- prompt templates -------------------------------------------------------


class TemplateError(FacetError):
    """Base class for template rendering problems."""


class MissingSlotError(TemplateError):
    def __init__(self, slot: str):
        self.slot = slot
        super().__init__(f"missing required slot: {slot}")


class UnknownSlotError(TemplateError):
    def __init__(self, slot: str):
        self.slot = slot
        super().__init__(f"unknown slot not present in template: {slot}")


class TemplateSyntaxError(TemplateError):
    """Unbalanced {{ }} markers in a template body."""


# --- llm gateway ------------------------------------------------------------


class GatewayError(FacetError):
    """Base class for chat-completion transport failures."""


class ProviderError(GatewayError):
    """Non-2xx HTTP response from the completion endpoint."""

    def __init__(self, status: int, body: str):
        self.status = status
        self.body = body
        super().__init__(f"provider returned HTTP {status}: {body[:200]}")

    @property
    def transient(self) -> bool:
        return self.status == 429 or self.status >= 500


class GatewayTimeoutError(GatewayError):
    """Request (including retries) exceeded the configured wall-time budget."""


class ReplayMissError(GatewayError):
    """Replay store has no recorded response for the request digest."""

    def __init__(self, digest: str):
        self.digest = digest
        super().__init__(f"no recorded response for request digest {digest}")


class RoutingError(GatewayError):
    """Model routing table has no entry for the requested agent role."""


# --- agents -----------------------------------------------------------------


class AgentError(FacetError):
    """Base class for agent output problems."""


class NoJsonBlockError(AgentError):
    """Model output contains no fenced ```json block."""


class JsonParseError(AgentError):
    """The fenced json block failed to parse."""

    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} (at position {position})")


class MalformedAgentOutput(AgentError):
    """Agent output still unusable after the bounded repair turns."""


class ConstraintViolation(AgentError):
    """Teacher worksheet violates hard constraints after the repair turns."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("worksheet constraint violations: " + "; ".join(violations))


# --- persistence ------------------------------------------------------------


class StorageError(FacetError):
    """Underlying document store failed or was asked to mutate a record."""


class NotFoundError(FacetError):
    """Referenced document does not exist in the store."""


# --- evaluation harness -----------------------------------------------------


class EmptyInputError(FacetError, ValueError):
    """Statistics requested over an empty value list."""


class IncompleteGridError(FacetError, ValueError):
    """Stats table rendering is missing a (profile, dimension) cell."""


class UnsupportedTaskError(FacetError, ValueError):
    """Answer-key oracle cannot enumerate the given task."""
