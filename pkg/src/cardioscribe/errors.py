"""Exception hierarchy shared across the engine."""
from __future__ import annotations


class CardioscribeError(Exception):
    """Base class for all engine errors."""


class SchemaError(CardioscribeError):
    """A document is missing a required section or field.

    ``pointer`` names the offending location (e.g. ``/biostatistics``).
    """

    def __init__(self, message: str, pointer: str | None = None):
        super().__init__(message)
        self.pointer = pointer


class UnresolvedImage(CardioscribeError):
    """A tracing's image reference cannot be resolved at bundle load."""


class UnknownArrhythmia(CardioscribeError):
    """Arrhythmia name is outside the classification vocabulary."""


class TemplateMissing(CardioscribeError):
    """No prompt template is registered for the requested agent role."""


class FormatError(CardioscribeError):
    """Non-empty completion text yielded zero parseable items."""


class UnsupportedModality(CardioscribeError):
    """An image part was sent to a backend without vision capability."""


class TransportError(CardioscribeError):
    """Network-level failure after exhausting retries."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class Timeout(TransportError):
    """Request deadline exceeded after exhausting retries."""


class BadStatus(CardioscribeError):
    """Terminal HTTP error status from a model backend."""

    def __init__(self, code: int, body_excerpt: str = ""):
        super().__init__(f"HTTP {code}: {body_excerpt[:200]}")
        self.code = code
        self.body_excerpt = body_excerpt


class ScriptTableMiss(CardioscribeError):
    """Scripted backend has no completion for the request fingerprint."""


class RuleSchemaError(CardioscribeError):
    """A guideline rule fails validation."""

    def __init__(self, message: str, rule_id: str | None = None, field: str | None = None):
        super().__init__(message)
        self.rule_id = rule_id
        self.field = field


class MissingSection(CardioscribeError):
    """Report assembly received inputs inconsistent with the target state."""


class UnknownFormat(CardioscribeError):
    """Unsupported render format."""


class PatientMismatch(CardioscribeError):
    """Questionnaire inputs span more than one patient."""


class TooFewRuns(CardioscribeError):
    """Stability scoring needs at least two generated texts."""


class MissingAdjudication(CardioscribeError):
    """Dataset export requires cardiologist-adjudicated outputs."""


class PipelineFailed(CardioscribeError):
    """A pipeline stage failed irrecoverably."""

    def __init__(self, stage: str, cause: str):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


class StoreConflict(CardioscribeError):
    """Compare-and-set revision mismatch in the document store."""

    def __init__(self, message: str, expected: int | None, actual: int | None):
        super().__init__(message)
        self.expected = expected
        self.actual = actual
