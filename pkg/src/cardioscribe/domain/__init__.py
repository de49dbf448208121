from .arrhythmia import bundle_class, canonicalize, classify_arrhythmia, subgroup_key, vocabulary
from .bundle_io import (
    BUNDLE_SCHEMA_VERSION,
    bundle_from_json,
    bundle_to_json,
    finding_from_json,
    finding_to_json,
    interpretation_from_json,
    interpretation_to_json,
    parse_bundle,
    serialize_bundle,
)
from .types import (
    AgeGroup,
    ArrhythmiaClass,
    Biostatistics,
    FindingItem,
    Gender,
    InterpretationItem,
    MetricRow,
    MetricsTable,
    Modality,
    ParameterValue,
    PatientBundle,
    SubgroupKey,
    Tracing,
    age_group_for,
)
from .vocabulary import MetricVocabulary, get_vocabulary

__all__ = [
    "AgeGroup",
    "ArrhythmiaClass",
    "Biostatistics",
    "BUNDLE_SCHEMA_VERSION",
    "FindingItem",
    "Gender",
    "InterpretationItem",
    "MetricRow",
    "MetricsTable",
    "MetricVocabulary",
    "Modality",
    "ParameterValue",
    "PatientBundle",
    "SubgroupKey",
    "Tracing",
    "age_group_for",
    "bundle_class",
    "bundle_from_json",
    "bundle_to_json",
    "canonicalize",
    "classify_arrhythmia",
    "finding_from_json",
    "finding_to_json",
    "get_vocabulary",
    "interpretation_from_json",
    "interpretation_to_json",
    "parse_bundle",
    "serialize_bundle",
    "subgroup_key",
    "vocabulary",
]
