"""Clinical value objects.

Everything here is immutable after construction and safe to share across
threads. Invariants are enforced in ``__post_init__`` so an instance that
exists is valid.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from functools import lru_cache
from typing import Mapping

from ..errors import SchemaError
from ..util import load_packaged_json
from .vocabulary import get_vocabulary


class Gender(str, Enum):
    MALE = "male"
    FEMALE = "female"
    OTHER = "other"


class AgeGroup(str, Enum):
    PEDIATRIC = "pediatric"
    ADULT = "adult"
    ELDERLY = "elderly"


class Modality(str, Enum):
    METRICS = "metrics"
    TRACING = "tracing"


class ArrhythmiaClass(IntEnum):
    """Severity-ordered arrhythmia classes; I benign, III life-threatening."""

    I = 1
    II = 2
    III = 3

    @property
    def label(self) -> str:
        return self.name

    @classmethod
    def from_label(cls, label: str) -> "ArrhythmiaClass":
        try:
            return cls[label]
        except KeyError:
            raise ValueError(f"unknown arrhythmia class label: {label!r}") from None


@lru_cache(maxsize=1)
def _age_bounds() -> tuple[int, int]:
    cfg = load_packaged_json("clinical_config.json")["age_groups"]
    return cfg["pediatric_max"], cfg["adult_max"]


def age_group_for(age_years: int, bounds: tuple[int, int] | None = None) -> AgeGroup:
    """Pure decision table over configurable cut points (default <18 / 18-64 / >=65)."""
    pediatric_max, adult_max = bounds if bounds is not None else _age_bounds()
    if age_years <= pediatric_max:
        return AgeGroup.PEDIATRIC
    if age_years <= adult_max:
        return AgeGroup.ADULT
    return AgeGroup.ELDERLY


# Direct identifiers must never appear in a de-identified patient id.
_DOB_RE = re.compile(r"\d{4}-\d{2}-\d{2}|\d{2}/\d{2}/\d{4}")


@dataclass(frozen=True)
class Biostatistics:
    patient_id: str
    gender: Gender
    age_years: int
    monitoring_hours: float
    age_group: AgeGroup = field(init=False)

    def __post_init__(self):
        if not self.patient_id:
            raise SchemaError("patient_id must be non-empty", pointer="/biostatistics/patient_id")
        if _DOB_RE.search(self.patient_id):
            raise SchemaError(
                "patient_id looks like a direct identifier (date)",
                pointer="/biostatistics/patient_id",
            )
        if self.age_years < 0:
            raise ValueError(f"age_years must be non-negative, got {self.age_years}")
        if self.monitoring_hours <= 0:
            raise ValueError(f"monitoring_hours must be positive, got {self.monitoring_hours}")
        object.__setattr__(self, "age_group", age_group_for(self.age_years))


@dataclass(frozen=True)
class MetricRow:
    attribute: str
    value: float | str | bool
    unit: str
    context: str | None = None
    canonical: bool = field(init=False)

    def __post_init__(self):
        if not self.attribute:
            raise SchemaError("metric attribute must be non-empty", pointer="/metrics")
        vocab = get_vocabulary()
        spec = vocab.attribute_spec(self.attribute)
        object.__setattr__(self, "canonical", spec is not None)
        if isinstance(self.value, bool) or not isinstance(self.value, (int, float)):
            return
        value = float(self.value)
        if self.unit.strip() in ("%", "percent") and not 0 <= value <= 100:
            raise ValueError(f"percentage out of range for {self.attribute!r}: {value}")
        if spec is not None:
            param = vocab.parameters.get(spec.parameter)
            if param is not None and param.kind == "duration" and value < 0:
                raise ValueError(f"negative duration for {self.attribute!r}: {value}")
            if not vocab.in_range(spec.parameter, value):
                raise ValueError(f"value out of range for {self.attribute!r}: {value}")


@dataclass(frozen=True)
class MetricsTable:
    rows: tuple[MetricRow, ...]

    def __post_init__(self):
        seen: set[str] = set()
        for row in self.rows:
            key = row.attribute.casefold()
            if key in seen:
                raise SchemaError(f"duplicate metric attribute {row.attribute!r}", pointer="/metrics")
            seen.add(key)

    def get(self, attribute: str) -> MetricRow | None:
        folded = attribute.casefold()
        for row in self.rows:
            if row.attribute.casefold() == folded:
                return row
        return None


@dataclass(frozen=True)
class Tracing:
    image_ref: str
    caption: str
    duration_seconds: float
    arrhythmia_tag: str | None = None

    def __post_init__(self):
        if not self.image_ref:
            raise SchemaError("tracing image_ref must be non-empty", pointer="/tracings")
        if self.duration_seconds <= 0:
            raise ValueError(f"duration_seconds must be positive, got {self.duration_seconds}")


@dataclass(frozen=True)
class ParameterValue:
    value: float | str | bool
    unit: str | None = None


@dataclass(frozen=True)
class FindingItem:
    statement: str
    source_modality: Modality
    parameters: Mapping[str, ParameterValue] = field(default_factory=dict)
    agent_iteration: int = 0

    def __post_init__(self):
        if not self.statement.strip():
            raise SchemaError("finding statement must be non-empty")
        if self.agent_iteration < 0:
            raise ValueError("agent_iteration must be non-negative")
        vocab = get_vocabulary()
        for name in self.parameters:
            if not vocab.is_parameter(name):
                raise SchemaError(f"parameter {name!r} is not in the canonical vocabulary")


@dataclass(frozen=True)
class InterpretationItem:
    statement: str
    diagnosis_tags: frozenset[str] = frozenset()
    supports: tuple[int, ...] = ()
    agent_iteration: int = 0

    def __post_init__(self):
        if not self.statement.strip():
            raise SchemaError("interpretation statement must be non-empty")
        if self.agent_iteration < 0:
            raise ValueError("agent_iteration must be non-negative")


@dataclass(frozen=True)
class SubgroupKey:
    gender: Gender
    age_group: AgeGroup
    arrhythmia_class: ArrhythmiaClass

    def __str__(self) -> str:
        return f"{self.gender.value}/{self.age_group.value}/{self.arrhythmia_class.label}"


@dataclass(frozen=True)
class PatientBundle:
    biostatistics: Biostatistics
    metrics: MetricsTable
    tracings: tuple[Tracing, ...] = ()
    adjudicated_findings: tuple[FindingItem, ...] | None = None
    adjudicated_interpretation: tuple[InterpretationItem, ...] | None = None

    def __post_init__(self):
        if self.adjudicated_interpretation is not None and self.adjudicated_findings is None:
            raise SchemaError(
                "adjudicated_interpretation requires adjudicated_findings",
                pointer="/adjudicated_findings",
            )
