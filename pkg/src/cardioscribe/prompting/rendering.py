"""Text renderings of patient data used in prompts, demos, and dataset export.

Nothing here truncates or paraphrases: every metric row and finding statement
appears verbatim in the rendered payloads.
"""
from __future__ import annotations

from ..domain.types import Biostatistics, FindingItem, MetricsTable, Tracing


def render_biostatistics(bio: Biostatistics) -> str:
    return (
        f"Patient ID: {bio.patient_id}\n"
        f"Gender: {bio.gender.value}\n"
        f"Age: {bio.age_years} ({bio.age_group.value})\n"
        f"Monitoring duration: {bio.monitoring_hours:g} hours"
    )


def render_metric_row(row) -> str:
    line = f"{row.attribute}: {row.value} {row.unit}".rstrip()
    if row.context:
        line += f" ({row.context})"
    return line


def render_metrics(metrics: MetricsTable) -> str:
    lines = ["Metrics (24-hour monitoring):"]
    lines.extend(render_metric_row(row) for row in metrics.rows)
    return "\n".join(lines)


def render_tracing_captions(tracings: tuple[Tracing, ...]) -> str:
    lines = ["ECG tracings:"]
    for i, tracing in enumerate(tracings, start=1):
        tag = f" [{tracing.arrhythmia_tag}]" if tracing.arrhythmia_tag else ""
        lines.append(f"Tracing {i}: {tracing.caption} ({tracing.duration_seconds:g} s){tag}")
    if len(lines) == 1:
        lines.append("(none)")
    return "\n".join(lines)


def render_numbered_findings(findings: tuple[FindingItem, ...] | list[FindingItem]) -> str:
    lines = ["Clinical findings:"]
    for i, item in enumerate(findings, start=1):
        lines.append(f"F{i}. {item.statement}")
    return "\n".join(lines)


def render_guideline_citations(rules) -> str:
    lines = ["Clinical guidelines:"]
    for rule in rules:
        lines.append(f"- [{rule.id}] {rule.guideline_text}")
    return "\n".join(lines)
