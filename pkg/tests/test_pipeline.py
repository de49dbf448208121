from __future__ import annotations

import pytest

import helpers
from cardioscribe.agents import AgentConfig, AgentRole, BackendHandle, fingerprint
from cardioscribe.domain.types import Modality, PatientBundle
from cardioscribe.errors import PipelineFailed
from cardioscribe.factcheck import ViolationKind, default_guidelines
from cardioscribe.pipeline import (
    JobState,
    PipelineConfig,
    is_legal_transition,
    run_findings,
    run_interpretation,
    run_pipeline,
)
from cardioscribe.prompting.builder import build_prompt
from cardioscribe.prompting.demos import select_demos
from cardioscribe.domain.arrhythmia import subgroup_key
from cardioscribe.reporting import render


# --- job state machine ---------------------------------------------------------

def test_legal_transition_chain():
    chain = ["Queued", "RunningFindings", "RunningInterpretation", "FactChecking", "Complete"]
    for old, new in zip(chain, chain[1:]):
        assert is_legal_transition(old, new)


def test_regenerating_branches():
    assert is_legal_transition("FactChecking", "Regenerating")
    assert is_legal_transition("Regenerating", "RunningFindings")
    assert is_legal_transition("Regenerating", "RunningInterpretation")
    assert is_legal_transition("FactChecking", "NeedsManualReview")


def test_failed_from_running_only():
    for state in ("RunningFindings", "RunningInterpretation", "FactChecking", "Regenerating"):
        assert is_legal_transition(state, "Failed")
    assert not is_legal_transition("Complete", "Failed")
    assert not is_legal_transition("Queued", "Failed")


def test_recovery_requeue_is_legal():
    assert is_legal_transition("RunningFindings", "Queued")
    assert not is_legal_transition("Complete", "Queued")


def test_terminal_states_are_absorbing():
    for terminal in ("Complete", "NeedsManualReview", "Failed"):
        for other in ("Queued", "RunningFindings", "Complete"):
            assert not is_legal_transition(terminal, other)


def test_jobstate_roundtrip():
    state = JobState("Regenerating", iteration=2)
    assert JobState.from_json(state.to_json()) == state


# --- findings union --------------------------------------------------------------

def test_disjoint_union_preserves_modalities(bundle, config):
    findings, degraded, _ = run_findings(bundle, config)
    assert len(findings) == 5
    assert degraded is False
    modalities = [f.source_modality for f in findings]
    assert modalities == [Modality.METRICS] * 3 + [Modality.TRACING] * 2


def test_empty_tracings_skips_t2f(bank):
    bundle = helpers.golden_bundle()
    no_tracing_bundle = PatientBundle(
        biostatistics=bundle.biostatistics, metrics=bundle.metrics, tracings=()
    )
    config = helpers.scripted_config(no_tracing_bundle, bank)
    findings, degraded, prompts = run_findings(no_tracing_bundle, config)
    assert degraded is False
    assert AgentRole.T2F not in prompts
    assert all(f.source_modality is Modality.METRICS for f in findings)
    assert len(findings) == 3


def test_duplicate_parameter_kept_from_metrics(bundle, bank):
    """Both agents emit PR=210; the metrics-sourced copy survives."""
    t2f_dup = "Findings:\n- PR Interval is 210 ms in the ECG tracings"
    config = helpers.scripted_config(bundle, bank)
    tables = {role: dict(agent.backend.script_table) for role, agent in config.agents.items()}
    key = subgroup_key(bundle)
    demos = [
        s.demo
        for s in select_demos(bank, key, n=3, seed=helpers.DEMO_SEED, role=AgentRole.T2F).demos
    ]
    t2f_prompt = build_prompt(AgentRole.T2F, bundle, demos=demos)
    tables[AgentRole.T2F] = {fingerprint(t2f_prompt, helpers.PARAMS): t2f_dup}
    agents = {
        role: AgentConfig(
            role=role,
            backend=BackendHandle(kind="scripted", script_table=tables[role]),
            model_name=f"scripted-{role.value.lower()}",
            params=helpers.PARAMS,
            vision=role is AgentRole.T2F,
        )
        for role in tables
    }
    config = PipelineConfig(
        agents=agents,
        demo_bank=bank,
        guidelines=config.guidelines,
        demo_seed=helpers.DEMO_SEED,
        created_at_override=helpers.FIXED_TIME,
    )
    findings, _, _ = run_findings(bundle, config)
    pr_items = [f for f in findings if "PR_INTERVAL_MS" in f.parameters]
    assert len(pr_items) == 1
    assert pr_items[0].source_modality is Modality.METRICS


def test_one_agent_failing_degrades(bundle, bank):
    config = helpers.scripted_config(bundle, bank)
    agents = dict(config.agents)
    agents[AgentRole.T2F] = AgentConfig(
        role=AgentRole.T2F,
        backend=BackendHandle(kind="scripted", script_table={}),  # every lookup misses
        model_name="broken",
        params=helpers.PARAMS,
        vision=True,
    )
    degraded_config = PipelineConfig(
        agents=agents,
        demo_bank=bank,
        guidelines=config.guidelines,
        demo_seed=helpers.DEMO_SEED,
        created_at_override=helpers.FIXED_TIME,
    )
    findings, degraded, _ = run_findings(bundle, degraded_config)
    assert degraded is True
    assert all(f.source_modality is Modality.METRICS for f in findings)


def test_both_agents_failing_raises(bundle, bank):
    agents = {
        role: AgentConfig(
            role=role,
            backend=BackendHandle(kind="scripted", script_table={}),
            model_name="broken",
            params=helpers.PARAMS,
            vision=role is AgentRole.T2F,
        )
        for role in (AgentRole.M2F, AgentRole.T2F, AgentRole.F2I)
    }
    config = PipelineConfig(
        agents=agents, demo_bank=bank, guidelines=default_guidelines()
    )
    with pytest.raises(PipelineFailed):
        run_findings(bundle, config)


# --- interpretation ---------------------------------------------------------------

def test_interpretation_counts(bundle, config):
    findings, _, _ = run_findings(bundle, config)
    items, _ = run_interpretation(findings, config, bundle)
    assert len(items) == 3


def test_interpretation_empty_findings_guard(bundle, config):
    with pytest.raises(ValueError):
        run_interpretation((), config, bundle)


def test_unresolvable_support_dropped(bundle, bank):
    wild = (
        "Interpretation:\n"
        "- Atrial fibrillation is present during the monitoring period. (supports: F1, F99)\n"
        "- The PR interval is slightly prolonged, suggesting a first-degree AV block. (supports: F2)"
    )
    config = helpers.scripted_config(bundle, bank, f2i_completion=wild)
    result = run_pipeline(bundle, config)
    item = result.report.interpretation[0]
    assert item.supports == (0,)
    warnings = [e for e in result.trace.events if e["event"] == "warning"]
    assert any("support" in w["payload"]["message"] for w in warnings)


# --- the full pipeline -------------------------------------------------------------

def test_golden_run_complete(bundle, config):
    result = run_pipeline(bundle, config)
    report = result.report
    assert report.meta.state == "Complete"
    assert report.meta.factcheck_iterations == 0
    assert len(report.findings) == 5
    assert len(report.interpretation) == 3
    assert report.violations == ()
    assert [s.name for s in result.states] == [
        "Queued",
        "RunningFindings",
        "RunningInterpretation",
        "FactChecking",
        "Complete",
    ]


def test_pipeline_byte_deterministic(bundle, config):
    first = render(run_pipeline(bundle, config).report, "json")
    for _ in range(3):
        assert render(run_pipeline(bundle, config).report, "json") == first


def test_regeneration_fixes_missing_tag(bundle, bank):
    config = helpers.scripted_config(
        bundle,
        bank,
        f2i_completion=helpers.F2I_OMITS_AVBLOCK,
        f2i_regen_completion=helpers.F2I_REGEN_FIX,
    )
    result = run_pipeline(bundle, config)
    assert result.report.meta.state == "Complete"
    assert result.report.meta.factcheck_iterations == 1
    tags = {t for item in result.report.interpretation for t in item.diagnosis_tags}
    assert "FIRST_DEGREE_AV_BLOCK" in tags
    regen_items = [i for i in result.report.interpretation if i.agent_iteration == 1]
    assert len(regen_items) == 1
    names = [s.name for s in result.states]
    assert names.count("Regenerating") == 1
    assert names[-1] == "Complete"


def test_regeneration_exhaustion_needs_manual_review(bundle, bank):
    config = helpers.scripted_config(
        bundle,
        bank,
        f2i_completion=helpers.F2I_OMITS_AVBLOCK,
        f2i_regen_completion=helpers.F2I_REGEN_NOFIX,
        max_factcheck_retries=2,
    )
    result = run_pipeline(bundle, config)
    report = result.report
    assert report.meta.state == "NeedsManualReview"
    assert report.meta.factcheck_iterations == 2
    open_mandatory = [v for v in report.violations if v.severity == "mandatory"]
    assert len(open_mandatory) == 1
    assert open_mandatory[0].kind == ViolationKind.MISSING
    names = [s.name for s in result.states]
    assert names.count("Regenerating") == 2


def test_trace_state_transitions_all_legal(bundle, bank):
    config = helpers.scripted_config(
        bundle,
        bank,
        f2i_completion=helpers.F2I_OMITS_AVBLOCK,
        f2i_regen_completion=helpers.F2I_REGEN_FIX,
    )
    result = run_pipeline(bundle, config)
    transitions = [e for e in result.trace.events if e["event"] == "state"]
    for event in transitions:
        old = event["payload"]["old"]
        if old is None:
            continue
        assert is_legal_transition(old["name"], event["payload"]["new"]["name"])


def test_union_property_every_finding_from_one_completion(bundle, config):
    result = run_pipeline(bundle, config)
    generations = [e for e in result.trace.events if e["event"] == "generation"]
    for finding in result.report.findings:
        carriers = [
            g for g in generations if finding.statement in g["payload"]["completion"]
        ]
        assert len(carriers) == 1


def test_monotone_agent_iterations(bundle, bank):
    config = helpers.scripted_config(
        bundle,
        bank,
        f2i_completion=helpers.F2I_OMITS_AVBLOCK,
        f2i_regen_completion=helpers.F2I_REGEN_FIX,
    )
    result = run_pipeline(bundle, config)
    original = [i for i in result.report.interpretation if i.agent_iteration == 0]
    regenerated = [i for i in result.report.interpretation if i.agent_iteration == 1]
    assert original and regenerated
    assert all(i.agent_iteration < 2 for i in result.report.interpretation)


def test_pipeline_failure_produces_failed_report(bundle, bank):
    agents = {
        role: AgentConfig(
            role=role,
            backend=BackendHandle(kind="scripted", script_table={}),
            model_name="broken",
            params=helpers.PARAMS,
            vision=role is AgentRole.T2F,
        )
        for role in (AgentRole.M2F, AgentRole.T2F, AgentRole.F2I)
    }
    config = PipelineConfig(agents=agents, demo_bank=bank, guidelines=default_guidelines())
    result = run_pipeline(bundle, config)
    assert result.report.meta.state == "Failed"
    assert result.states[-1].name == "Failed"
    assert result.states[-1].reason
    assert result.report.findings == ()
