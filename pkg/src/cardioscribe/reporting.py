"""End-of-study report assembly and rendering (canonical JSON, text, HTML)."""
from __future__ import annotations

import html
import json
from dataclasses import dataclass, replace
from typing import Mapping

from .domain.bundle_io import (
    finding_from_json,
    finding_to_json,
    interpretation_from_json,
    interpretation_to_json,
)
from .domain.types import (
    Biostatistics,
    FindingItem,
    Gender,
    InterpretationItem,
    MetricRow,
    MetricsTable,
    PatientBundle,
    Tracing,
)
from .errors import MissingSection, SchemaError, UnknownFormat
from .factcheck import Violation, violation_from_json
from .prompting.rendering import render_metric_row
from .util import canonical_json

REPORT_SCHEMA_VERSION = "report/v1"

REVIEW_STATUSES = ("preliminary", "reviewed", "signed")

TERMINAL_STATES = ("Complete", "NeedsManualReview", "Failed")


@dataclass(frozen=True)
class ReportMeta:
    engine_version: str
    model_names: Mapping[str, str]
    guideline_set_version: str
    demo_ids: Mapping[str, tuple[str, ...]]
    factcheck_iterations: int
    state: str
    created_at: str
    degraded: bool = False


@dataclass(frozen=True)
class ItemEdit:
    target_kind: str  # finding | interpretation
    target_index: int
    old_text: str
    new_text: str
    editor_id: str
    at: str


@dataclass(frozen=True)
class ReviewBlock:
    status: str = "preliminary"
    edits: tuple[ItemEdit, ...] = ()
    reviewer_id: str | None = None
    reviewed_at: str | None = None


@dataclass(frozen=True)
class Report:
    biostatistics: Biostatistics
    metrics: MetricsTable
    tracings: tuple[Tracing, ...]
    findings: tuple[FindingItem, ...]
    interpretation: tuple[InterpretationItem, ...]
    violations: tuple[Violation, ...]
    meta: ReportMeta
    review: ReviewBlock


def assemble(
    bundle: PatientBundle,
    findings: tuple[FindingItem, ...] | list[FindingItem],
    interpretation: tuple[InterpretationItem, ...] | list[InterpretationItem],
    meta: ReportMeta,
    violations: tuple[Violation, ...] | list[Violation] = (),
) -> Report:
    """Join the five report sections; freshly assembled reports are preliminary."""
    if meta.state not in TERMINAL_STATES:
        raise MissingSection(f"meta.state must be terminal, got {meta.state!r}")
    if meta.state in ("Complete", "NeedsManualReview"):
        if not findings:
            raise MissingSection("findings section is empty")
        if not interpretation:
            raise MissingSection("interpretation section is empty")
    return Report(
        biostatistics=bundle.biostatistics,
        metrics=bundle.metrics,
        tracings=bundle.tracings,
        findings=tuple(findings),
        interpretation=tuple(interpretation),
        violations=tuple(violations),
        meta=meta,
        review=ReviewBlock(),
    )


def report_to_json(report: Report) -> dict:
    bio = report.biostatistics
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "biostatistics": {
            "patient_id": bio.patient_id,
            "gender": bio.gender.value,
            "age_years": bio.age_years,
            "age_group": bio.age_group.value,
            "monitoring_hours": bio.monitoring_hours,
        },
        "metrics": [
            {"attribute": r.attribute, "value": r.value, "unit": r.unit, "context": r.context}
            for r in report.metrics.rows
        ],
        "tracings": [
            {
                "image_ref": t.image_ref,
                "caption": t.caption,
                "duration_seconds": t.duration_seconds,
                "arrhythmia_tag": t.arrhythmia_tag,
            }
            for t in report.tracings
        ],
        "findings": [finding_to_json(f) for f in report.findings],
        "interpretation": [interpretation_to_json(i) for i in report.interpretation],
        "violations": [v.to_json() for v in report.violations],
        "meta": {
            "engine_version": report.meta.engine_version,
            "model_names": dict(sorted(report.meta.model_names.items())),
            "guideline_set_version": report.meta.guideline_set_version,
            "demo_ids": {k: list(v) for k, v in sorted(report.meta.demo_ids.items())},
            "factcheck_iterations": report.meta.factcheck_iterations,
            "state": report.meta.state,
            "created_at": report.meta.created_at,
            "degraded": report.meta.degraded,
        },
        "review": {
            "status": report.review.status,
            "edits": [
                {
                    "target_kind": e.target_kind,
                    "target_index": e.target_index,
                    "old_text": e.old_text,
                    "new_text": e.new_text,
                    "editor_id": e.editor_id,
                    "at": e.at,
                }
                for e in report.review.edits
            ],
            "reviewer_id": report.review.reviewer_id,
            "reviewed_at": report.review.reviewed_at,
        },
    }


def report_from_json(doc: dict) -> Report:
    if doc.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise SchemaError(
            f"expected schema_version {REPORT_SCHEMA_VERSION!r}, got {doc.get('schema_version')!r}",
            pointer="/schema_version",
        )
    bio_doc = doc["biostatistics"]
    bio = Biostatistics(
        patient_id=bio_doc["patient_id"],
        gender=Gender(bio_doc["gender"]),
        age_years=bio_doc["age_years"],
        monitoring_hours=bio_doc["monitoring_hours"],
    )
    meta_doc = doc["meta"]
    review_doc = doc["review"]
    return Report(
        biostatistics=bio,
        metrics=MetricsTable(
            rows=tuple(
                MetricRow(
                    attribute=r["attribute"], value=r["value"], unit=r["unit"], context=r.get("context")
                )
                for r in doc["metrics"]
            )
        ),
        tracings=tuple(
            Tracing(
                image_ref=t["image_ref"],
                caption=t["caption"],
                duration_seconds=t["duration_seconds"],
                arrhythmia_tag=t.get("arrhythmia_tag"),
            )
            for t in doc["tracings"]
        ),
        findings=tuple(finding_from_json(f) for f in doc["findings"]),
        interpretation=tuple(interpretation_from_json(i) for i in doc["interpretation"]),
        violations=tuple(violation_from_json(v) for v in doc.get("violations", ())),
        meta=ReportMeta(
            engine_version=meta_doc["engine_version"],
            model_names=dict(meta_doc["model_names"]),
            guideline_set_version=meta_doc["guideline_set_version"],
            demo_ids={k: tuple(v) for k, v in meta_doc["demo_ids"].items()},
            factcheck_iterations=meta_doc["factcheck_iterations"],
            state=meta_doc["state"],
            created_at=meta_doc["created_at"],
            degraded=meta_doc.get("degraded", False),
        ),
        review=ReviewBlock(
            status=review_doc["status"],
            edits=tuple(
                ItemEdit(
                    target_kind=e["target_kind"],
                    target_index=e["target_index"],
                    old_text=e["old_text"],
                    new_text=e["new_text"],
                    editor_id=e["editor_id"],
                    at=e["at"],
                )
                for e in review_doc.get("edits", ())
            ),
            reviewer_id=review_doc.get("reviewer_id"),
            reviewed_at=review_doc.get("reviewed_at"),
        ),
    )


def parse_report(data: bytes) -> Report:
    return report_from_json(json.loads(data.decode("utf-8")))


def _render_text(report: Report) -> str:
    bio = report.biostatistics
    lines = [
        "END-OF-STUDY REPORT",
        "===================",
        "",
        "Patient",
        "-------",
        f"ID: {bio.patient_id}",
        f"Gender: {bio.gender.value}",
        f"Age: {bio.age_years} ({bio.age_group.value})",
        f"Monitoring duration: {bio.monitoring_hours:g} hours",
        "",
        "Metrics",
        "-------",
    ]
    lines.extend(render_metric_row(r) for r in report.metrics.rows)
    lines += ["", "Tracings", "--------"]
    if report.tracings:
        for i, t in enumerate(report.tracings, start=1):
            lines.append(f"{i}. [{t.image_ref}] {t.caption} ({t.duration_seconds:g} s)")
    else:
        lines.append("(none)")
    lines += ["", "Findings", "--------"]
    for i, f in enumerate(report.findings, start=1):
        lines.append(f"{i}. {f.statement}")
    lines += ["", "Interpretation", "--------------"]
    for i, item in enumerate(report.interpretation, start=1):
        lines.append(f"{i}. {item.statement}")
    if report.violations:
        lines += ["", "Open fact-check violations", "--------------------------"]
        for v in report.violations:
            lines.append(f"- [{v.rule_id or 'unruled'}] {v.kind}")
    lines += [
        "",
        "Signature",
        "---------",
        f"Review status: {report.review.status}",
        f"Reviewer: {report.review.reviewer_id or '-'}",
        f"Generated by engine {report.meta.engine_version} at {report.meta.created_at}",
        "",
    ]
    return "\n".join(lines)


def _image_src(ref: str) -> str:
    if ref.startswith("sha256:"):
        return f"/v1/images/{ref.removeprefix('sha256:')}"
    return ref


def _render_html(report: Report) -> str:
    bio = report.biostatistics
    esc = html.escape
    parts = [
        "<!DOCTYPE html>",
        '<html><head><meta charset="utf-8"><title>End-of-study report</title></head><body>',
        '<article id="report">',
        '<section id="biostatistics"><h1>End-of-study report</h1><dl>',
        f"<dt>Patient ID</dt><dd>{esc(bio.patient_id)}</dd>",
        f"<dt>Gender</dt><dd>{esc(bio.gender.value)}</dd>",
        f"<dt>Age</dt><dd>{bio.age_years} ({esc(bio.age_group.value)})</dd>",
        f"<dt>Monitoring duration</dt><dd>{bio.monitoring_hours:g} hours</dd>",
        "</dl></section>",
        '<section id="metrics"><h2>Metrics</h2><table>',
        "<tr><th>Attribute</th><th>Value</th><th>Unit</th><th>Context</th></tr>",
    ]
    for r in report.metrics.rows:
        parts.append(
            f"<tr><td>{esc(r.attribute)}</td><td>{esc(str(r.value))}</td>"
            f"<td>{esc(r.unit)}</td><td>{esc(r.context or '')}</td></tr>"
        )
    parts.append("</table></section>")
    parts.append('<section id="tracings"><h2>Tracings</h2>')
    for i, t in enumerate(report.tracings, start=1):
        parts.append(
            f'<figure id="tracing-{i}"><img src="{esc(_image_src(t.image_ref))}" '
            f'alt="{esc(t.caption)}"><figcaption>{esc(t.caption)} '
            f"({t.duration_seconds:g} s)</figcaption></figure>"
        )
    parts.append("</section>")
    parts.append('<section id="findings"><h2>Findings</h2><ol>')
    for i, f in enumerate(report.findings, start=1):
        parts.append(f'<li id="finding-{i}">{esc(f.statement)}</li>')
    parts.append("</ol></section>")
    parts.append('<section id="interpretation"><h2>Interpretation</h2><ol>')
    for i, item in enumerate(report.interpretation, start=1):
        parts.append(f'<li id="interpretation-{i}">{esc(item.statement)}</li>')
    parts.append("</ol></section>")
    if report.violations:
        parts.append('<section id="violations"><h2>Open fact-check violations</h2><ul>')
        for v in report.violations:
            parts.append(f"<li>[{esc(v.rule_id or 'unruled')}] {esc(v.kind)}</li>")
        parts.append("</ul></section>")
    parts.append(
        '<section id="signature"><h2>Signature</h2>'
        f"<p>Review status: {esc(report.review.status)}</p>"
        f"<p>Reviewer: {esc(report.review.reviewer_id or '-')}</p>"
        f"<p>Generated by engine {esc(report.meta.engine_version)} at {esc(report.meta.created_at)}</p>"
        "</section>"
    )
    parts.append("</article></body></html>")
    return "\n".join(parts)


def render(report: Report, format: str = "json") -> bytes:
    if format == "json":
        return canonical_json(report_to_json(report)).encode("utf-8")
    if format == "text":
        return _render_text(report).encode("utf-8")
    if format == "html":
        return _render_html(report).encode("utf-8")
    raise UnknownFormat(f"unknown report format {format!r}")


def apply_edits(
    report: Report,
    edits: list[dict],
    editor_id: str,
    at: str,
    status: str | None = None,
) -> Report:
    """Apply reviewer edits; history is append-only and old_text must match."""
    findings = list(report.findings)
    interpretation = list(report.interpretation)
    applied = list(report.review.edits)
    for edit in edits:
        kind = edit["target_kind"]
        index = edit["target_index"]
        items = findings if kind == "finding" else interpretation
        if kind not in ("finding", "interpretation"):
            raise SchemaError(f"unknown edit target kind {kind!r}")
        if not 0 <= index < len(items):
            raise SchemaError(f"edit target index {index} out of range")
        current = items[index]
        if current.statement != edit["old_text"]:
            raise ValueError(
                f"old_text mismatch for {kind} {index}: expected {current.statement!r}"
            )
        items[index] = replace(current, statement=edit["new_text"])
        applied.append(
            ItemEdit(
                target_kind=kind,
                target_index=index,
                old_text=edit["old_text"],
                new_text=edit["new_text"],
                editor_id=editor_id,
                at=at,
            )
        )
    review = ReviewBlock(
        status=status or report.review.status,
        edits=tuple(applied),
        reviewer_id=editor_id,
        reviewed_at=at,
    )
    if status is not None:
        _check_status_transition(report.review.status, status)
    return replace(
        report,
        findings=tuple(findings),
        interpretation=tuple(interpretation),
        review=review,
    )


def _check_status_transition(old: str, new: str) -> None:
    order = {s: i for i, s in enumerate(REVIEW_STATUSES)}
    if new not in order:
        raise SchemaError(f"unknown review status {new!r}")
    if order[new] < order[old]:
        raise SchemaError(f"review status can only move forward, not {old} -> {new}")
    if new == "signed" and old == "preliminary":
        raise SchemaError("reports must be reviewed before they are signed")
