"""Instruction-record export from adjudicated bundles, one JSON object per line.

Role-wise mapping: the metrics agent trains on (metrics, biostatistics) ->
metrics findings, the tracings agent on (tracings, biostatistics) -> tracing
findings, and the interpretation agent on (findings, guideline citations) ->
interpretation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from ..agents import AgentRole
from ..domain.types import Modality, PatientBundle
from ..errors import MissingAdjudication
from ..factcheck import GuidelineSet
from ..prompting.builder import patient_payload_text
from ..prompting.itemized import render_itemized
from ..prompting.templates import template_for


@dataclass(frozen=True)
class InstructionRecord:
    system: str
    input: str
    output: str

    def to_json(self) -> dict:
        return {"system": self.system, "input": self.input, "output": self.output}


def record_for_bundle(
    bundle: PatientBundle, role: AgentRole, guidelines: GuidelineSet | None = None
) -> InstructionRecord:
    if bundle.adjudicated_findings is None:
        raise MissingAdjudication(
            f"bundle {bundle.biostatistics.patient_id} has no adjudicated findings"
        )
    template = template_for(role)
    if role is AgentRole.M2F:
        outputs = [f for f in bundle.adjudicated_findings if f.source_modality is Modality.METRICS]
        if not outputs:
            raise MissingAdjudication(
                f"bundle {bundle.biostatistics.patient_id} has no metrics-sourced findings"
            )
        input_text = patient_payload_text(role, bundle)
        output_text = render_itemized(tuple(outputs), "findings")
    elif role is AgentRole.T2F:
        outputs = [f for f in bundle.adjudicated_findings if f.source_modality is Modality.TRACING]
        if not outputs:
            raise MissingAdjudication(
                f"bundle {bundle.biostatistics.patient_id} has no tracing-sourced findings"
            )
        input_text = patient_payload_text(role, bundle)
        output_text = render_itemized(tuple(outputs), "findings")
    elif role is AgentRole.F2I:
        if bundle.adjudicated_interpretation is None:
            raise MissingAdjudication(
                f"bundle {bundle.biostatistics.patient_id} has no adjudicated interpretation"
            )
        input_text = patient_payload_text(
            role, bundle, upstream=bundle.adjudicated_findings, guidelines=guidelines
        )
        output_text = render_itemized(bundle.adjudicated_interpretation, "interpretation")
    else:
        raise ValueError(f"unknown role {role!r}")
    return InstructionRecord(system=template.system_text, input=input_text, output=output_text)


def export_finetune_dataset(
    bundles: Iterable[PatientBundle],
    role: AgentRole,
    out_path: str | Path,
    guidelines: GuidelineSet | None = None,
) -> int:
    """Write one instruction record per adjudicated bundle; returns the count."""
    records = [record_for_bundle(b, role, guidelines=guidelines) for b in bundles]
    path = Path(out_path)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json(), ensure_ascii=False, sort_keys=True) + "\n")
    return len(records)


def read_dataset(path: str | Path) -> list[InstructionRecord]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        records.append(InstructionRecord(system=doc["system"], input=doc["input"], output=doc["output"]))
    return records
