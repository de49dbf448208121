"""The diagnostic pipeline: findings from both modalities run concurrently,
their union feeds the interpretation agent, and a guideline fact-check loop
regenerates violated items until clean, out of retries, or failed.

With scripted backends and fixed seeds the whole run is byte-deterministic.
"""
from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field
from typing import Callable, Mapping

from . import __version__
from .agents import AgentConfig, AgentRole, ChatMessage, ImagePart, Role, TextPart, generate
from .domain.arrhythmia import subgroup_key
from .domain.types import FindingItem, InterpretationItem, Modality, PatientBundle
from .errors import CardioscribeError, FormatError, PipelineFailed
from .factcheck import GuidelineSet, Violation, ViolationKind, check, mandatory
from .prompting.builder import build_prompt, reprompt_messages
from .prompting.demos import DemoBank, DemoSelection, select_demos
from .prompting.itemized import parse_itemized
from .prompting.templates import template_for
from .reporting import Report, ReportMeta, assemble
from .util import Clock, fixed_clock, utc_now_iso

# ---------------------------------------------------------------------------
# Job states

RUNNING_STATES = ("RunningFindings", "RunningInterpretation", "FactChecking", "Regenerating")
TERMINAL_STATES = ("Complete", "NeedsManualReview", "Failed")

_LEGAL_TRANSITIONS: dict[str, tuple[str, ...]] = {
    "Queued": ("RunningFindings",),
    "RunningFindings": ("RunningInterpretation", "Failed", "Queued"),
    "RunningInterpretation": ("FactChecking", "Failed", "Queued"),
    "FactChecking": ("Complete", "Regenerating", "NeedsManualReview", "Failed", "Queued"),
    "Regenerating": ("RunningFindings", "RunningInterpretation", "Failed", "Queued"),
    "Complete": (),
    "NeedsManualReview": (),
    "Failed": (),
}


@dataclass(frozen=True)
class JobState:
    name: str
    iteration: int | None = None  # populated for Regenerating
    reason: str | None = None  # populated for Failed

    def __post_init__(self):
        if self.name not in _LEGAL_TRANSITIONS:
            raise ValueError(f"unknown job state {self.name!r}")

    def to_json(self) -> dict:
        doc: dict = {"name": self.name}
        if self.iteration is not None:
            doc["iteration"] = self.iteration
        if self.reason is not None:
            doc["reason"] = self.reason
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "JobState":
        return cls(name=doc["name"], iteration=doc.get("iteration"), reason=doc.get("reason"))


def is_legal_transition(old: JobState | str, new: JobState | str) -> bool:
    """Queued -> running chain -> terminal; crash recovery may re-queue a running job."""
    old_name = old.name if isinstance(old, JobState) else old
    new_name = new.name if isinstance(new, JobState) else new
    return new_name in _LEGAL_TRANSITIONS.get(old_name, ())


# ---------------------------------------------------------------------------
# Trace

def _message_to_json(message: ChatMessage) -> dict:
    parts = []
    for part in message.parts:
        if isinstance(part, TextPart):
            parts.append({"text": part.text})
        elif isinstance(part, ImagePart):
            parts.append({"image": part.image_ref})
    return {"role": message.role.value, "parts": parts}


class PipelineTrace:
    """Append-only audit log of one pipeline run."""

    TRACE_SCHEMA_VERSION = "trace/v1"

    def __init__(self, clock: Clock):
        self._clock = clock
        self.events: list[dict] = []

    def add(self, event: str, **payload) -> None:
        self.events.append(
            {"seq": len(self.events), "at": self._clock(), "event": event, "payload": payload}
        )

    def state(self, old: JobState | None, new: JobState) -> None:
        self.add("state", old=old.to_json() if old else None, new=new.to_json())

    def to_json(self) -> dict:
        return {"schema_version": self.TRACE_SCHEMA_VERSION, "events": self.events}


# ---------------------------------------------------------------------------
# Configuration

@dataclass(frozen=True)
class PipelineConfig:
    agents: Mapping[AgentRole, AgentConfig]
    demo_bank: DemoBank
    guidelines: GuidelineSet
    max_factcheck_retries: int = 2
    demo_seed: int = 0
    demos_per_prompt: int = 3
    created_at_override: str | None = None

    def __post_init__(self):
        if self.max_factcheck_retries < 0:
            raise ValueError("max_factcheck_retries must be >= 0")
        for role in (AgentRole.M2F, AgentRole.F2I):
            if role not in self.agents:
                raise ValueError(f"pipeline config missing agent {role.value}")

    def clock(self) -> Clock:
        if self.created_at_override is not None:
            return fixed_clock(self.created_at_override)
        return utc_now_iso


@dataclass
class PipelineResult:
    report: Report
    trace: PipelineTrace
    states: list[JobState] = field(default_factory=list)


StateCallback = Callable[[JobState], None]


# ---------------------------------------------------------------------------
# Stage helpers

_MODALITY_FOR_ROLE = {AgentRole.M2F: Modality.METRICS, AgentRole.T2F: Modality.TRACING}


def _select_for_role(config: PipelineConfig, role: AgentRole, key) -> DemoSelection:
    return select_demos(
        config.demo_bank, key, n=config.demos_per_prompt, seed=config.demo_seed, role=role
    )


def _generate_parsed(
    agent: AgentConfig,
    messages: list[ChatMessage],
    kind: str,
    trace: PipelineTrace,
    *,
    modality: Modality = Modality.METRICS,
    iteration: int = 0,
    purpose: str = "initial",
):
    """One completion plus bounded self-repair: a single re-prompt on FormatError."""
    completion = generate(agent, messages)
    trace.add(
        "generation",
        role=agent.role.value,
        purpose=purpose,
        iteration=iteration,
        prompt=[_message_to_json(m) for m in messages],
        completion=completion,
    )
    try:
        return parse_itemized(completion, kind, source_modality=modality, iteration=iteration)
    except FormatError:
        retry = reprompt_messages(messages, template_for(agent.role).response_skeleton)
        completion = generate(agent, retry)
        trace.add(
            "generation",
            role=agent.role.value,
            purpose=f"{purpose}-reprompt",
            iteration=iteration,
            prompt=[_message_to_json(m) for m in retry],
            completion=completion,
        )
        return parse_itemized(completion, kind, source_modality=modality, iteration=iteration)


def _dedup_key(item: FindingItem) -> tuple:
    if item.parameters:
        return tuple(sorted((name, repr(pv.value)) for name, pv in item.parameters.items()))
    return ("statement", " ".join(item.statement.split()).casefold())


def _union_findings(
    metrics_items: tuple[FindingItem, ...], tracing_items: tuple[FindingItem, ...]
) -> tuple[FindingItem, ...]:
    """Union both agents' items; cross-modality duplicates keep the metrics copy."""
    merged: list[FindingItem] = []
    seen: set[tuple] = set()
    for item in (*metrics_items, *tracing_items):
        key = _dedup_key(item)
        if key in seen:
            continue
        seen.add(key)
        merged.append(item)
    return tuple(merged)


def run_findings(
    bundle: PatientBundle,
    config: PipelineConfig,
    trace: PipelineTrace | None = None,
) -> tuple[tuple[FindingItem, ...], bool, dict[AgentRole, list[ChatMessage]]]:
    """Generate findings from metrics and tracings concurrently and union them.

    Returns (findings, degraded, prompts-by-role). One agent failing degrades
    the run to the surviving modality; both failing raises PipelineFailed.
    """
    if trace is None:
        trace = PipelineTrace(config.clock())
    key = subgroup_key(bundle)
    roles = [AgentRole.M2F]
    if bundle.tracings and AgentRole.T2F in config.agents:
        roles.append(AgentRole.T2F)

    prompts: dict[AgentRole, list[ChatMessage]] = {}
    selections: dict[AgentRole, DemoSelection] = {}
    for role in roles:
        selection = _select_for_role(config, role, key)
        selections[role] = selection
        trace.add(
            "demos",
            role=role.value,
            demo_ids=list(selection.demo_ids),
            zero_shot=selection.zero_shot,
            levels=[s.relaxation_level for s in selection.demos],
        )
        prompts[role] = build_prompt(role, bundle, demos=[s.demo for s in selection.demos])

    results: dict[AgentRole, tuple[FindingItem, ...]] = {}
    errors: dict[AgentRole, str] = {}

    def _run(role: AgentRole) -> tuple[FindingItem, ...]:
        parsed = _generate_parsed(
            config.agents[role],
            prompts[role],
            "findings",
            trace,
            modality=_MODALITY_FOR_ROLE[role],
        )
        return parsed.findings

    # The two modalities are independent; run them in parallel.
    with concurrent.futures.ThreadPoolExecutor(max_workers=len(roles)) as pool:
        futures = {role: pool.submit(_run, role) for role in roles}
        for role, future in futures.items():
            try:
                results[role] = future.result()
            except CardioscribeError as exc:
                errors[role] = f"{type(exc).__name__}: {exc}"
                trace.add("agent_error", role=role.value, error=errors[role])

    if not results:
        raise PipelineFailed("findings", "; ".join(f"{r.value}: {e}" for r, e in errors.items()))
    degraded = bool(errors)
    if degraded:
        trace.add("warning", message="findings degraded to a single modality", errors=errors)

    findings = _union_findings(
        results.get(AgentRole.M2F, ()), results.get(AgentRole.T2F, ())
    )
    trace.add("findings", count=len(findings), degraded=degraded)
    return findings, degraded, prompts


def _resolve_supports(
    items: tuple[InterpretationItem, ...],
    n_findings: int,
    trace: PipelineTrace,
) -> tuple[InterpretationItem, ...]:
    resolved = []
    for item in items:
        good = tuple(i for i in item.supports if 0 <= i < n_findings)
        if good != item.supports:
            trace.add(
                "warning",
                message="dropped unresolvable support references",
                statement=item.statement,
                dropped=[i + 1 for i in item.supports if not 0 <= i < n_findings],
            )
            item = InterpretationItem(
                statement=item.statement,
                diagnosis_tags=item.diagnosis_tags,
                supports=good,
                agent_iteration=item.agent_iteration,
            )
        resolved.append(item)
    return tuple(resolved)


def run_interpretation(
    findings: tuple[FindingItem, ...],
    config: PipelineConfig,
    bundle: PatientBundle,
    trace: PipelineTrace | None = None,
    iteration: int = 0,
) -> tuple[tuple[InterpretationItem, ...], list[ChatMessage]]:
    """Synthesize the interpretation from findings under the guideline set."""
    if not findings:
        raise ValueError("findings must be non-empty before interpretation")
    if trace is None:
        trace = PipelineTrace(config.clock())
    key = subgroup_key(bundle)
    selection = _select_for_role(config, AgentRole.F2I, key)
    trace.add(
        "demos",
        role=AgentRole.F2I.value,
        demo_ids=list(selection.demo_ids),
        zero_shot=selection.zero_shot,
        levels=[s.relaxation_level for s in selection.demos],
    )
    messages = build_prompt(
        AgentRole.F2I,
        bundle,
        demos=[s.demo for s in selection.demos],
        upstream=findings,
        guidelines=config.guidelines,
    )
    parsed = _generate_parsed(
        config.agents[AgentRole.F2I], messages, "interpretation", trace, iteration=iteration
    )
    items = _resolve_supports(parsed.interpretation, len(findings), trace)
    trace.add("interpretation", count=len(items), iteration=iteration)
    return items, messages


# ---------------------------------------------------------------------------
# Regeneration

def _remap_supports(
    items: tuple[InterpretationItem, ...], index_map: dict[int, int | None]
) -> tuple[InterpretationItem, ...]:
    out = []
    for item in items:
        new_refs = tuple(
            index_map[i] for i in item.supports if index_map.get(i) is not None
        )
        if new_refs != item.supports:
            item = InterpretationItem(
                statement=item.statement,
                diagnosis_tags=item.diagnosis_tags,
                supports=new_refs,
                agent_iteration=item.agent_iteration,
            )
        out.append(item)
    return tuple(out)


def _regenerate_findings(
    config: PipelineConfig,
    trace: PipelineTrace,
    findings: tuple[FindingItem, ...],
    interpretation: tuple[InterpretationItem, ...],
    prompts: dict[AgentRole, list[ChatMessage]],
    violations_by_agent: dict[AgentRole, list[Violation]],
    iteration: int,
) -> tuple[tuple[FindingItem, ...], tuple[InterpretationItem, ...]]:
    """Re-request only the violated finding items from their source agents."""
    new_findings = list(findings)
    replaced: dict[int, FindingItem | None] = {}
    for role, violations in violations_by_agent.items():
        if role not in prompts or role not in config.agents:
            continue
        violated = sorted({i for v in violations for i in v.finding_refs})
        instruction = "\n\n".join(v.regeneration_instruction for v in violations)
        messages = prompts[role] + [ChatMessage.text(Role.USER, instruction)]
        parsed = _generate_parsed(
            config.agents[role],
            messages,
            "findings",
            trace,
            modality=_MODALITY_FOR_ROLE[role],
            iteration=iteration,
            purpose="regenerate",
        )
        replacements = list(parsed.findings)
        for idx in violated:
            replaced[idx] = replacements.pop(0) if replacements else None
        new_findings.extend(replacements)  # extra items the agent volunteered

    index_map: dict[int, int | None] = {}
    rebuilt: list[FindingItem] = []
    for i, item in enumerate(new_findings):
        if i in replaced:
            replacement = replaced[i]
            if replacement is None:
                index_map[i] = None
                continue
            item = replacement
        index_map[i] = len(rebuilt)
        rebuilt.append(item)
    return tuple(rebuilt), _remap_supports(interpretation, index_map)


def _regenerate_interpretation(
    config: PipelineConfig,
    trace: PipelineTrace,
    bundle: PatientBundle,
    findings: tuple[FindingItem, ...],
    interpretation: tuple[InterpretationItem, ...],
    violations: list[Violation],
    iteration: int,
) -> tuple[InterpretationItem, ...]:
    """Ask the interpretation agent to fix only the violated items; others stay frozen."""
    key = subgroup_key(bundle)
    selection = _select_for_role(config, AgentRole.F2I, key)
    base = build_prompt(
        AgentRole.F2I,
        bundle,
        demos=[s.demo for s in selection.demos],
        upstream=findings,
        guidelines=config.guidelines,
    )
    instruction = "\n\n".join(v.regeneration_instruction for v in violations)
    messages = base + [ChatMessage.text(Role.USER, instruction)]
    parsed = _generate_parsed(
        config.agents[AgentRole.F2I],
        messages,
        "interpretation",
        trace,
        iteration=iteration,
        purpose="regenerate",
    )
    fresh = _resolve_supports(parsed.interpretation, len(findings), trace)

    drop = {i for v in violations if v.kind == ViolationKind.CONTRADICTED for i in v.interpretation_refs}
    kept = tuple(item for i, item in enumerate(interpretation) if i not in drop)
    return kept + fresh


def run_pipeline(
    bundle: PatientBundle,
    config: PipelineConfig,
    on_state: StateCallback | None = None,
) -> PipelineResult:
    """Execute the full diagnostic flow and assemble the end-of-study report."""
    clock = config.clock()
    trace = PipelineTrace(clock)
    states: list[JobState] = [JobState("Queued")]
    trace.state(None, states[0])

    def advance(state: JobState) -> None:
        if not is_legal_transition(states[-1], state):
            raise PipelineFailed("state-machine", f"illegal transition {states[-1].name} -> {state.name}")
        trace.state(states[-1], state)
        states.append(state)
        if on_state is not None:
            on_state(state)

    def meta_for(state: str, iterations: int, degraded: bool) -> ReportMeta:
        return ReportMeta(
            engine_version=__version__,
            model_names={role.value: a.model_name for role, a in config.agents.items()},
            guideline_set_version=config.guidelines.version,
            demo_ids={
                role.value: _select_for_role(config, role, subgroup_key(bundle)).demo_ids
                for role in config.agents
                if role is not AgentRole.T2F or bundle.tracings
            },
            factcheck_iterations=iterations,
            state=state,
            created_at=clock(),
            degraded=degraded,
        )

    findings: tuple[FindingItem, ...] = ()
    interpretation: tuple[InterpretationItem, ...] = ()
    open_violations: list[Violation] = []
    iterations = 0
    degraded = False
    try:
        advance(JobState("RunningFindings"))
        findings, degraded, prompts = run_findings(bundle, config, trace)

        advance(JobState("RunningInterpretation"))
        interpretation, _ = run_interpretation(findings, config, bundle, trace)

        advance(JobState("FactChecking"))
        open_violations = check(findings, interpretation, config.guidelines)
        trace.add("violations", iteration=0, violations=[v.to_json() for v in open_violations])

        while mandatory(open_violations) and iterations < config.max_factcheck_retries:
            iterations += 1
            advance(JobState("Regenerating", iteration=iterations))
            pending = mandatory(open_violations)
            findings_targets = {
                role: [v for v in pending if v.target_agent is role]
                for role in (AgentRole.M2F, AgentRole.T2F)
            }
            findings_targets = {r: vs for r, vs in findings_targets.items() if vs}
            f2i_violations = [v for v in pending if v.target_agent is AgentRole.F2I]

            if findings_targets:
                advance(JobState("RunningFindings"))
                findings, interpretation = _regenerate_findings(
                    config, trace, findings, interpretation, prompts, findings_targets, iterations
                )
                # Findings changed, so the contradicted statements must be revisited.
                f2i_violations = f2i_violations + [
                    v for vs in findings_targets.values() for v in vs
                ]

            advance(JobState("RunningInterpretation"))
            if f2i_violations:
                interpretation = _regenerate_interpretation(
                    config, trace, bundle, findings, interpretation, f2i_violations, iterations
                )

            advance(JobState("FactChecking"))
            open_violations = check(findings, interpretation, config.guidelines)
            trace.add(
                "violations", iteration=iterations, violations=[v.to_json() for v in open_violations]
            )

        if mandatory(open_violations):
            advance(JobState("NeedsManualReview"))
            state_name = "NeedsManualReview"
        else:
            advance(JobState("Complete"))
            state_name = "Complete"
        report = assemble(
            bundle,
            findings,
            interpretation,
            meta_for(state_name, iterations, degraded),
            violations=tuple(open_violations),
        )
    except PipelineFailed as exc:
        failed = JobState("Failed", reason=str(exc))
        trace.state(states[-1], failed)
        states.append(failed)
        if on_state is not None:
            on_state(failed)
        report = assemble(
            bundle,
            findings,
            interpretation,
            meta_for("Failed", iterations, degraded),
            violations=tuple(open_violations),
        )

    trace.add("done", state=states[-1].to_json())
    return PipelineResult(report=report, trace=trace, states=states)
