"""Blinded questionnaires for clinical validation.

Model identities are replaced by content-free aliases ("Model A", ...) under a
seeded permutation per patient; the alias map is sealed separately from the
rendered body so raters never see real model names.
"""
from __future__ import annotations

import hashlib
import random
import string
from dataclasses import dataclass
from typing import Mapping

from ..errors import PatientMismatch
from ..prompting.itemized import render_itemized
from ..reporting import Report
from .metrics import MetricId


@dataclass(frozen=True)
class QuestionnaireSection:
    alias: str
    findings_text: str
    interpretation_text: str


@dataclass(frozen=True)
class Questionnaire:
    patient_id: str
    seed: int
    sections: tuple[QuestionnaireSection, ...]
    alias_map: Mapping[str, str]  # alias -> real model name; sealed, not rendered

    def body(self) -> str:
        """The rater-facing text: patient data, per-alias outputs, rating scale."""
        lines = [
            f"Clinical validation questionnaire - patient {self.patient_id}",
            "",
            "For each model section below, rate the eight metrics from 1 to 5",
            "(1 = not at all, 3 = acceptable, 5 = excellent):",
            ", ".join(m.value for m in MetricId),
            "",
        ]
        for section in self.sections:
            lines += [
                f"=== {section.alias} ===",
                section.findings_text,
                "",
                section.interpretation_text,
                "",
            ]
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "seed": self.seed,
            "sections": [
                {
                    "alias": s.alias,
                    "findings_text": s.findings_text,
                    "interpretation_text": s.interpretation_text,
                }
                for s in self.sections
            ],
        }


def _alias_label(i: int) -> str:
    return f"Model {string.ascii_uppercase[i]}"


def build_questionnaire(reports: Mapping[str, Report], seed: int = 0) -> Questionnaire:
    """Blind one patient's reports from several models behind aliased sections."""
    if not reports:
        raise PatientMismatch("need at least one report")
    patient_ids = {r.biostatistics.patient_id for r in reports.values()}
    if len(patient_ids) != 1:
        raise PatientMismatch(f"reports span multiple patients: {sorted(patient_ids)}")
    patient_id = patient_ids.pop()

    model_names = sorted(reports)
    material = f"questionnaire|{patient_id}|{seed}"
    rng = random.Random(int.from_bytes(hashlib.sha256(material.encode()).digest()[:8], "big"))
    order = list(model_names)
    rng.shuffle(order)

    sections = []
    alias_map: dict[str, str] = {}
    for i, model in enumerate(order):
        alias = _alias_label(i)
        alias_map[alias] = model
        report = reports[model]
        sections.append(
            QuestionnaireSection(
                alias=alias,
                findings_text=render_itemized(report.findings, "findings"),
                interpretation_text=render_itemized(report.interpretation, "interpretation"),
            )
        )
    return Questionnaire(
        patient_id=patient_id, seed=seed, sections=tuple(sections), alias_map=alias_map
    )
