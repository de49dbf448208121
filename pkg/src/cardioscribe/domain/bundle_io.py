"""Patient bundle (de)serialization: versioned JSON and CSV+manifest ingestion."""
from __future__ import annotations

import csv
import io
import json
import re
from pathlib import Path
from typing import Any

from ..errors import SchemaError, UnresolvedImage
from ..util import canonical_json
from .types import (
    Biostatistics,
    FindingItem,
    Gender,
    InterpretationItem,
    MetricRow,
    MetricsTable,
    Modality,
    ParameterValue,
    PatientBundle,
    Tracing,
)

BUNDLE_SCHEMA_VERSION = "bundle/v1"

_HASH_REF_RE = re.compile(r"^sha256:[0-9a-f]{64}$")


def _require(doc: dict, key: str, pointer: str) -> Any:
    if key not in doc or doc[key] is None:
        raise SchemaError(f"missing required section {key!r}", pointer=pointer)
    return doc[key]


def finding_to_json(item: FindingItem) -> dict:
    return {
        "statement": item.statement,
        "source_modality": item.source_modality.value,
        "parameters": {
            name: {"value": pv.value, "unit": pv.unit}
            for name, pv in sorted(item.parameters.items())
        },
        "agent_iteration": item.agent_iteration,
    }


def finding_from_json(doc: dict) -> FindingItem:
    try:
        return FindingItem(
            statement=doc["statement"],
            source_modality=Modality(doc["source_modality"]),
            parameters={
                name: ParameterValue(value=pv["value"], unit=pv.get("unit"))
                for name, pv in doc.get("parameters", {}).items()
            },
            agent_iteration=doc.get("agent_iteration", 0),
        )
    except KeyError as exc:
        raise SchemaError(f"finding item missing field {exc}", pointer="/findings") from exc


def interpretation_to_json(item: InterpretationItem) -> dict:
    return {
        "statement": item.statement,
        "diagnosis_tags": sorted(item.diagnosis_tags),
        "supports": list(item.supports),
        "agent_iteration": item.agent_iteration,
    }


def interpretation_from_json(doc: dict) -> InterpretationItem:
    try:
        return InterpretationItem(
            statement=doc["statement"],
            diagnosis_tags=frozenset(doc.get("diagnosis_tags", ())),
            supports=tuple(doc.get("supports", ())),
            agent_iteration=doc.get("agent_iteration", 0),
        )
    except KeyError as exc:
        raise SchemaError(f"interpretation item missing field {exc}", pointer="/interpretation") from exc


def _biostatistics_from_json(doc: dict) -> Biostatistics:
    try:
        gender = Gender(doc["gender"])
    except (KeyError, ValueError) as exc:
        raise SchemaError(f"bad or missing gender: {exc}", pointer="/biostatistics/gender") from exc
    return Biostatistics(
        patient_id=_require(doc, "patient_id", "/biostatistics/patient_id"),
        gender=gender,
        age_years=_require(doc, "age_years", "/biostatistics/age_years"),
        monitoring_hours=_require(doc, "monitoring_hours", "/biostatistics/monitoring_hours"),
    )


def _metric_row_from_json(doc: dict) -> MetricRow:
    return MetricRow(
        attribute=_require(doc, "attribute", "/metrics"),
        value=_require(doc, "value", "/metrics"),
        unit=doc.get("unit", ""),
        context=doc.get("context"),
    )


def _tracing_from_json(doc: dict, base_dir: Path | None) -> Tracing:
    image_ref = _resolve_image_ref(_require(doc, "image_ref", "/tracings"), base_dir)
    return Tracing(
        image_ref=image_ref,
        caption=doc.get("caption", ""),
        duration_seconds=_require(doc, "duration_seconds", "/tracings"),
        arrhythmia_tag=doc.get("arrhythmia_tag"),
    )


def _resolve_image_ref(ref: str, base_dir: Path | None) -> str:
    """Hash refs pass through; path refs must exist and are absolutized so the
    bundle stays loadable after the current directory changes."""
    if _HASH_REF_RE.match(ref):
        return ref
    path = Path(ref)
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    if not path.is_file():
        raise UnresolvedImage(f"tracing image not found: {ref}")
    return str(path.resolve())


def bundle_from_json(doc: dict, base_dir: Path | None = None) -> PatientBundle:
    if doc.get("schema_version") != BUNDLE_SCHEMA_VERSION:
        raise SchemaError(
            f"expected schema_version {BUNDLE_SCHEMA_VERSION!r}, got {doc.get('schema_version')!r}",
            pointer="/schema_version",
        )
    bio = _biostatistics_from_json(_require(doc, "biostatistics", "/biostatistics"))
    metric_rows = tuple(_metric_row_from_json(r) for r in _require(doc, "metrics", "/metrics"))
    tracings = tuple(_tracing_from_json(t, base_dir) for t in doc.get("tracings", ()))
    adjudicated_f = doc.get("adjudicated_findings")
    adjudicated_i = doc.get("adjudicated_interpretation")
    return PatientBundle(
        biostatistics=bio,
        metrics=MetricsTable(rows=metric_rows),
        tracings=tracings,
        adjudicated_findings=(
            tuple(finding_from_json(f) for f in adjudicated_f) if adjudicated_f is not None else None
        ),
        adjudicated_interpretation=(
            tuple(interpretation_from_json(i) for i in adjudicated_i)
            if adjudicated_i is not None
            else None
        ),
    )


def bundle_to_json(bundle: PatientBundle) -> dict:
    bio = bundle.biostatistics
    doc: dict[str, Any] = {
        "schema_version": BUNDLE_SCHEMA_VERSION,
        "biostatistics": {
            "patient_id": bio.patient_id,
            "gender": bio.gender.value,
            "age_years": bio.age_years,
            "monitoring_hours": bio.monitoring_hours,
        },
        "metrics": [
            {"attribute": r.attribute, "value": r.value, "unit": r.unit, "context": r.context}
            for r in bundle.metrics.rows
        ],
        "tracings": [
            {
                "image_ref": t.image_ref,
                "caption": t.caption,
                "duration_seconds": t.duration_seconds,
                "arrhythmia_tag": t.arrhythmia_tag,
            }
            for t in bundle.tracings
        ],
        "adjudicated_findings": (
            [finding_to_json(f) for f in bundle.adjudicated_findings]
            if bundle.adjudicated_findings is not None
            else None
        ),
        "adjudicated_interpretation": (
            [interpretation_to_json(i) for i in bundle.adjudicated_interpretation]
            if bundle.adjudicated_interpretation is not None
            else None
        ),
    }
    return doc


def serialize_bundle(bundle: PatientBundle) -> bytes:
    return canonical_json(bundle_to_json(bundle)).encode("utf-8")


def _parse_metrics_csv(text: str) -> tuple[MetricRow, ...]:
    """Rows of ``attribute,value,unit[,context]``; a header row is optional."""
    rows: list[MetricRow] = []
    reader = csv.reader(io.StringIO(text))
    for lineno, record in enumerate(reader, start=1):
        if not record or all(not cell.strip() for cell in record):
            continue
        if lineno == 1 and [c.strip().casefold() for c in record[:2]] == ["attribute", "value"]:
            continue
        if len(record) < 3:
            raise SchemaError(f"metrics CSV line {lineno}: expected attribute,value,unit", pointer="/metrics")
        attribute, raw_value, unit = (record[0].strip(), record[1].strip(), record[2].strip())
        context = record[3].strip() if len(record) > 3 and record[3].strip() else None
        value: float | str
        try:
            value = float(raw_value)
            if value.is_integer():
                value = int(value)
        except ValueError:
            value = raw_value
        rows.append(MetricRow(attribute=attribute, value=value, unit=unit, context=context))
    return tuple(rows)


def parse_bundle(raw: bytes, format: str = "json", base_dir: Path | None = None) -> PatientBundle:
    """Parse a patient bundle from its on-disk representation.

    ``json`` is the canonical format. ``csv+manifest`` takes a manifest JSON
    carrying biostatistics/tracings plus the metrics table as CSV, either
    inline (``metrics_csv``) or next to the manifest (``metrics_csv_path``).
    """
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"bundle is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("bundle document must be a JSON object")

    if format == "json":
        return bundle_from_json(doc, base_dir=base_dir)
    if format == "csv+manifest":
        if "metrics_csv" in doc:
            csv_text = doc["metrics_csv"]
        elif "metrics_csv_path" in doc:
            path = Path(doc["metrics_csv_path"])
            if not path.is_absolute() and base_dir is not None:
                path = base_dir / path
            if not path.is_file():
                raise SchemaError(f"metrics CSV not found: {doc['metrics_csv_path']}", pointer="/metrics_csv_path")
            csv_text = path.read_text(encoding="utf-8")
        else:
            raise SchemaError("manifest needs metrics_csv or metrics_csv_path", pointer="/metrics_csv")
        json_doc = dict(doc)
        json_doc.pop("metrics_csv", None)
        json_doc.pop("metrics_csv_path", None)
        json_doc.setdefault("schema_version", BUNDLE_SCHEMA_VERSION)
        json_doc["metrics"] = []
        bundle = bundle_from_json(json_doc, base_dir=base_dir)
        return PatientBundle(
            biostatistics=bundle.biostatistics,
            metrics=MetricsTable(rows=_parse_metrics_csv(csv_text)),
            tracings=bundle.tracings,
            adjudicated_findings=bundle.adjudicated_findings,
            adjudicated_interpretation=bundle.adjudicated_interpretation,
        )
    raise SchemaError(f"unknown bundle format {format!r}")
