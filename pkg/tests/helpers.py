"""Shared fixture builders: golden patient bundle, demo bank, scripted tables."""
from __future__ import annotations

import json
from pathlib import Path

from cardioscribe.agents import (
    AgentConfig,
    AgentRole,
    BackendHandle,
    GenerationParams,
    fingerprint,
)
from cardioscribe.domain.types import (
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
from cardioscribe.factcheck import GuidelineSet, check, default_guidelines
from cardioscribe.pipeline import PipelineConfig, _union_findings
from cardioscribe.prompting.bankbuild import build_bank
from cardioscribe.prompting.builder import build_prompt
from cardioscribe.prompting.demos import DemoBank, bank_to_json, select_demos
from cardioscribe.prompting.itemized import parse_itemized
from cardioscribe.util import canonical_json

IMG_A = "sha256:" + "a" * 64
IMG_B = "sha256:" + "b" * 64

FIXED_TIME = "2026-01-01T00:00:00Z"
DEMO_SEED = 7
PARAMS = GenerationParams(temperature=0.0, max_tokens=1024, seed=7)

M2F_COMPLETION = """Findings:
- AF Burden is 12 % over the monitoring period
- PR Interval is 210 ms on average over the monitoring period
- Max Heart Rate is 140 bpm over the monitoring period"""

T2F_COMPLETION = """Findings:
- Atrial fibrillation with irregular RR intervals is visible in the ECG tracings
- VT: not present in the ECG tracings"""

F2I_COMPLETION = """Interpretation:
- Atrial fibrillation is present with a burden of 12 % of the monitoring period. (supports: F1, F4)
- The PR interval is slightly prolonged, suggesting a first-degree AV block. (supports: F2)
- No ventricular tachycardia was recorded. (supports: F5)"""

# Initial completion for the regeneration scenario: the AV-block diagnosis is
# missing even though PR = 210 ms triggers the guideline.
F2I_OMITS_AVBLOCK = """Interpretation:
- Atrial fibrillation is present with a burden of 12 % of the monitoring period. (supports: F1, F4)"""

F2I_REGEN_FIX = """Interpretation:
- The PR interval is slightly prolonged, suggesting a first-degree AV block. (supports: F2)"""

F2I_REGEN_NOFIX = """Interpretation:
- Monitoring quality was adequate throughout the study."""


def golden_bundle() -> PatientBundle:
    return PatientBundle(
        biostatistics=Biostatistics(
            patient_id="P-0001", gender=Gender.FEMALE, age_years=72, monitoring_hours=24.0
        ),
        metrics=MetricsTable(
            rows=(
                MetricRow(attribute="AF Burden", value=12, unit="%"),
                MetricRow(attribute="PR Interval", value=210, unit="ms"),
                MetricRow(attribute="Max Heart Rate", value=140, unit="bpm"),
            )
        ),
        tracings=(
            Tracing(
                image_ref=IMG_A,
                caption="AF episode at 02:13",
                duration_seconds=10.0,
                arrhythmia_tag="Atrial Fibrillation (AF)",
            ),
            Tracing(image_ref=IMG_B, caption="Baseline rhythm at 14:00", duration_seconds=10.0),
        ),
    )


def _adjudicated_bundle(patient_id: str, age: int) -> PatientBundle:
    findings = (
        FindingItem(
            statement="AF Burden is 9 % over the monitoring period",
            source_modality=Modality.METRICS,
            parameters={"AF_BURDEN_PCT": ParameterValue(9, "%")},
        ),
        FindingItem(
            statement="Atrial fibrillation is visible in the ECG tracings",
            source_modality=Modality.TRACING,
        ),
    )
    interpretation = (
        InterpretationItem(
            statement="Atrial fibrillation is present during the monitoring period.",
            diagnosis_tags=frozenset({"ATRIAL_FIBRILLATION"}),
            supports=(0, 1),
        ),
    )
    return PatientBundle(
        biostatistics=Biostatistics(
            patient_id=patient_id, gender=Gender.FEMALE, age_years=age, monitoring_hours=24.0
        ),
        metrics=MetricsTable(rows=(MetricRow(attribute="AF Burden", value=9, unit="%"),)),
        tracings=(
            Tracing(
                image_ref=IMG_A,
                caption="AF run",
                duration_seconds=10.0,
                arrhythmia_tag="AF",
            ),
        ),
        adjudicated_findings=findings,
        adjudicated_interpretation=interpretation,
    )


def demo_bundles() -> list[PatientBundle]:
    return [_adjudicated_bundle("DEMO-A", 70), _adjudicated_bundle("DEMO-B", 68)]


def golden_bank() -> DemoBank:
    return build_bank(demo_bundles())


def parsed_union() -> tuple[FindingItem, ...]:
    m = parse_itemized(M2F_COMPLETION, "findings", source_modality=Modality.METRICS).findings
    t = parse_itemized(T2F_COMPLETION, "findings", source_modality=Modality.TRACING).findings
    return _union_findings(m, t)


def build_script_tables(
    bundle: PatientBundle,
    bank: DemoBank,
    guidelines: GuidelineSet,
    f2i_completion: str = F2I_COMPLETION,
    f2i_regen_completion: str | None = None,
) -> dict[AgentRole, dict[str, str]]:
    """Fingerprint->completion tables replaying the pipeline's exact prompts."""
    from cardioscribe.agents import ChatMessage, Role
    from cardioscribe.domain.arrhythmia import subgroup_key

    key = subgroup_key(bundle)
    tables: dict[AgentRole, dict[str, str]] = {}

    def demos_for(role: AgentRole):
        return [s.demo for s in select_demos(bank, key, n=3, seed=DEMO_SEED, role=role).demos]

    m2f_prompt = build_prompt(AgentRole.M2F, bundle, demos=demos_for(AgentRole.M2F))
    tables[AgentRole.M2F] = {fingerprint(m2f_prompt, PARAMS): M2F_COMPLETION}

    t2f_prompt = build_prompt(AgentRole.T2F, bundle, demos=demos_for(AgentRole.T2F))
    tables[AgentRole.T2F] = {fingerprint(t2f_prompt, PARAMS): T2F_COMPLETION}

    findings = parsed_union()
    f2i_prompt = build_prompt(
        AgentRole.F2I, bundle, demos=demos_for(AgentRole.F2I), upstream=findings, guidelines=guidelines
    )
    tables[AgentRole.F2I] = {fingerprint(f2i_prompt, PARAMS): f2i_completion}

    if f2i_regen_completion is not None:
        bad_interpretation = parse_itemized(f2i_completion, "interpretation").interpretation
        violations = [
            v for v in check(findings, bad_interpretation, guidelines) if v.severity == "mandatory"
        ]
        instruction = "\n\n".join(v.regeneration_instruction for v in violations)
        regen_prompt = f2i_prompt + [ChatMessage.text(Role.USER, instruction)]
        tables[AgentRole.F2I][fingerprint(regen_prompt, PARAMS)] = f2i_regen_completion
    return tables


def scripted_config(
    bundle: PatientBundle,
    bank: DemoBank | None = None,
    guidelines: GuidelineSet | None = None,
    f2i_completion: str = F2I_COMPLETION,
    f2i_regen_completion: str | None = None,
    max_factcheck_retries: int = 2,
    created_at: str | None = FIXED_TIME,
) -> PipelineConfig:
    bank = bank if bank is not None else golden_bank()
    guidelines = guidelines if guidelines is not None else default_guidelines()
    tables = build_script_tables(
        bundle,
        bank,
        guidelines,
        f2i_completion=f2i_completion,
        f2i_regen_completion=f2i_regen_completion,
    )
    agents = {
        role: AgentConfig(
            role=role,
            backend=BackendHandle(kind="scripted", script_table=tables[role]),
            model_name=f"scripted-{role.value.lower()}",
            params=PARAMS,
            vision=role is AgentRole.T2F,
        )
        for role in (AgentRole.M2F, AgentRole.T2F, AgentRole.F2I)
    }
    return PipelineConfig(
        agents=agents,
        demo_bank=bank,
        guidelines=guidelines,
        max_factcheck_retries=max_factcheck_retries,
        demo_seed=DEMO_SEED,
        created_at_override=created_at,
    )


def write_cli_fixtures(
    directory: Path,
    bundle: PatientBundle,
    config: PipelineConfig,
    latency_ms: int = 0,
) -> tuple[Path, Path]:
    """Write bundle + config + script tables + bank as files for CLI/service runs."""
    from cardioscribe.domain.bundle_io import serialize_bundle
    from cardioscribe.factcheck import guidelines_to_json

    directory.mkdir(parents=True, exist_ok=True)
    bundle_path = directory / "bundle.json"
    bundle_path.write_bytes(serialize_bundle(bundle))

    bank_path = directory / "bank.json"
    bank_path.write_text(canonical_json(bank_to_json(config.demo_bank)), encoding="utf-8")

    guide_path = directory / "guidelines.json"
    guide_path.write_text(canonical_json(guidelines_to_json(config.guidelines)), encoding="utf-8")

    agents_doc = {}
    for role, agent in config.agents.items():
        table_path = directory / f"script-{role.value.lower()}.json"
        table_path.write_text(json.dumps(dict(agent.backend.script_table)), encoding="utf-8")
        agents_doc[role.value] = {
            "backend": {"kind": "scripted", "script_path": table_path.name, "latency_ms": latency_ms},
            "model_name": agent.model_name,
            "params": {
                "temperature": agent.params.temperature,
                "max_tokens": agent.params.max_tokens,
                "seed": agent.params.seed,
            },
            "vision": agent.vision,
        }
    config_doc = {
        "schema_version": "pipelineconfig/v1",
        "agents": agents_doc,
        "demo_bank": bank_path.name,
        "guidelines": guide_path.name,
        "max_factcheck_retries": config.max_factcheck_retries,
        "demo_seed": config.demo_seed,
        "demos_per_prompt": config.demos_per_prompt,
        "created_at_override": config.created_at_override,
    }
    config_path = directory / "config.json"
    config_path.write_text(canonical_json(config_doc), encoding="utf-8")
    return bundle_path, config_path
