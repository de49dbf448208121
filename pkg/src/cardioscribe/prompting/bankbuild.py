"""Build a demo bank from cardiologist-adjudicated patient bundles."""
from __future__ import annotations

from typing import Iterable

from ..agents import AgentRole
from ..domain.arrhythmia import subgroup_key
from ..domain.types import Modality, PatientBundle
from .builder import patient_payload_text
from .demos import Demo, DemoBank
from .itemized import render_itemized


def demos_for_bundle(bundle: PatientBundle) -> list[Demo]:
    if bundle.adjudicated_findings is None:
        return []
    key = subgroup_key(bundle)
    patient_id = bundle.biostatistics.patient_id
    demos: list[Demo] = []

    metrics_findings = tuple(
        f for f in bundle.adjudicated_findings if f.source_modality is Modality.METRICS
    )
    if metrics_findings:
        demos.append(
            Demo(
                id=f"m2f-{patient_id}",
                role=AgentRole.M2F,
                key=key,
                input_excerpt=patient_payload_text(AgentRole.M2F, bundle),
                adjudicated_output=render_itemized(metrics_findings, "findings"),
            )
        )
    tracing_findings = tuple(
        f for f in bundle.adjudicated_findings if f.source_modality is Modality.TRACING
    )
    if tracing_findings:
        demos.append(
            Demo(
                id=f"t2f-{patient_id}",
                role=AgentRole.T2F,
                key=key,
                input_excerpt=patient_payload_text(AgentRole.T2F, bundle),
                adjudicated_output=render_itemized(tracing_findings, "findings"),
            )
        )
    if bundle.adjudicated_interpretation is not None:
        demos.append(
            Demo(
                id=f"f2i-{patient_id}",
                role=AgentRole.F2I,
                key=key,
                input_excerpt=patient_payload_text(
                    AgentRole.F2I, bundle, upstream=bundle.adjudicated_findings
                ),
                adjudicated_output=render_itemized(
                    bundle.adjudicated_interpretation, "interpretation"
                ),
            )
        )
    return demos


def build_bank(bundles: Iterable[PatientBundle]) -> DemoBank:
    demos: list[Demo] = []
    for bundle in bundles:
        demos.extend(demos_for_bundle(bundle))
    return DemoBank(demos=demos)
