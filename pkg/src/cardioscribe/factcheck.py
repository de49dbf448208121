"""Guideline rules and the fact-check pass over findings/interpretation.

Rules are threshold predicates over canonical parameters, each requiring a
diagnosis tag when triggered. ``check`` is pure: the same (F, I, G) always
yields the same violation list, sorted by rule id and finding refs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .agents import AgentRole
from .domain.types import FindingItem, InterpretationItem, Modality
from .domain.vocabulary import get_vocabulary
from .errors import RuleSchemaError
from .util import content_hash, load_packaged_json

GUIDELINES_SCHEMA_VERSION = "guidelines/v1"

COMPARATORS = (">", ">=", "<", "<=", "equals", "in_range")


@dataclass(frozen=True)
class GuidelineRule:
    id: str
    parameter: str
    comparator: str
    threshold: float | bool | tuple[float, float]
    unit: str | None
    required_tag: str
    guideline_text: str
    severity: str  # advisory | mandatory

    def evaluate(self, value: float | bool | str) -> bool | None:
        """Predicate over one finding value; None when the value is not comparable."""
        if self.comparator == "equals":
            return value == self.threshold
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return None
        number = float(value)
        if self.comparator == ">":
            return number > self.threshold
        if self.comparator == ">=":
            return number >= self.threshold
        if self.comparator == "<":
            return number < self.threshold
        if self.comparator == "<=":
            return number <= self.threshold
        if self.comparator == "in_range":
            lo, hi = self.threshold
            return lo <= number <= hi
        raise RuleSchemaError(f"unknown comparator {self.comparator!r}", rule_id=self.id)


@dataclass(frozen=True)
class GuidelineSet:
    rules: tuple[GuidelineRule, ...]
    version: str
    name: str = "guidelines"

    def rules_for_tag(self, tag: str) -> tuple[GuidelineRule, ...]:
        return tuple(r for r in self.rules if r.required_tag == tag)


def _rule_to_json(rule: GuidelineRule) -> dict:
    threshold = list(rule.threshold) if isinstance(rule.threshold, tuple) else rule.threshold
    return {
        "id": rule.id,
        "parameter": rule.parameter,
        "comparator": rule.comparator,
        "threshold": threshold,
        "unit": rule.unit,
        "required_tag": rule.required_tag,
        "guideline_text": rule.guideline_text,
        "severity": rule.severity,
    }


def guidelines_to_json(guidelines: GuidelineSet) -> dict:
    return {
        "schema_version": GUIDELINES_SCHEMA_VERSION,
        "name": guidelines.name,
        "rules": [_rule_to_json(r) for r in guidelines.rules],
    }


def _validate_rule(doc: dict) -> GuidelineRule:
    rule_id = doc.get("id")
    if not rule_id:
        raise RuleSchemaError("rule missing id", field="id")
    for field_name in ("parameter", "comparator", "required_tag", "guideline_text", "severity"):
        if not doc.get(field_name):
            raise RuleSchemaError(f"rule {rule_id}: missing {field_name}", rule_id=rule_id, field=field_name)
    if doc["comparator"] not in COMPARATORS:
        raise RuleSchemaError(
            f"rule {rule_id}: unknown comparator {doc['comparator']!r}", rule_id=rule_id, field="comparator"
        )
    if doc["severity"] not in ("advisory", "mandatory"):
        raise RuleSchemaError(
            f"rule {rule_id}: severity must be advisory or mandatory", rule_id=rule_id, field="severity"
        )
    threshold = doc.get("threshold")
    if doc["comparator"] == "in_range":
        if not isinstance(threshold, list) or len(threshold) != 2:
            raise RuleSchemaError(
                f"rule {rule_id}: in_range needs [lo, hi]", rule_id=rule_id, field="threshold"
            )
        threshold = (float(threshold[0]), float(threshold[1]))
    elif doc["comparator"] == "equals":
        if threshold is None:
            raise RuleSchemaError(f"rule {rule_id}: missing threshold", rule_id=rule_id, field="threshold")
    else:
        if not isinstance(threshold, (int, float)) or isinstance(threshold, bool):
            raise RuleSchemaError(
                f"rule {rule_id}: threshold must be numeric", rule_id=rule_id, field="threshold"
            )

    vocab = get_vocabulary()
    parameter = doc["parameter"]
    spec = vocab.parameters.get(parameter)
    if spec is None:
        raise RuleSchemaError(
            f"rule {rule_id}: parameter {parameter!r} not in vocabulary", rule_id=rule_id, field="parameter"
        )
    unit = doc.get("unit")
    if vocab.normalize_unit(parameter, unit) != spec.unit:
        raise RuleSchemaError(
            f"rule {rule_id}: unit {unit!r} does not match {parameter}'s canonical unit {spec.unit!r}",
            rule_id=rule_id,
            field="unit",
        )
    return GuidelineRule(
        id=rule_id,
        parameter=parameter,
        comparator=doc["comparator"],
        threshold=threshold,
        unit=spec.unit,
        required_tag=doc["required_tag"],
        guideline_text=doc["guideline_text"],
        severity=doc["severity"],
    )


def guidelines_from_json(doc: dict) -> GuidelineSet:
    if doc.get("schema_version") != GUIDELINES_SCHEMA_VERSION:
        raise RuleSchemaError(
            f"expected schema_version {GUIDELINES_SCHEMA_VERSION!r}, got {doc.get('schema_version')!r}"
        )
    rules = tuple(_validate_rule(r) for r in doc.get("rules", ()))
    seen: set[str] = set()
    for rule in rules:
        if rule.id in seen:
            raise RuleSchemaError(f"duplicate rule id {rule.id!r}", rule_id=rule.id, field="id")
        seen.add(rule.id)
    version = content_hash([_rule_to_json(r) for r in rules])
    return GuidelineSet(rules=rules, version=version, name=doc.get("name", "guidelines"))


def load_guidelines(path: str | Path) -> GuidelineSet:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise RuleSchemaError(f"cannot read guideline file: {exc}") from exc
    return guidelines_from_json(doc)


def default_guidelines() -> GuidelineSet:
    return guidelines_from_json(load_packaged_json("guidelines.json"))


class ViolationKind:
    MISSING = "missing_interpretation"
    CONTRADICTED = "contradicted_interpretation"
    UNSUPPORTED = "unsupported_interpretation"


@dataclass(frozen=True)
class Violation:
    rule_id: str | None
    kind: str
    finding_refs: tuple[int, ...]
    interpretation_refs: tuple[int, ...]
    regeneration_instruction: str
    target_agent: AgentRole
    severity: str

    def to_json(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "kind": self.kind,
            "finding_refs": list(self.finding_refs),
            "interpretation_refs": list(self.interpretation_refs),
            "regeneration_instruction": self.regeneration_instruction,
            "target_agent": self.target_agent.value,
            "severity": self.severity,
        }


def violation_from_json(doc: dict) -> Violation:
    return Violation(
        rule_id=doc.get("rule_id"),
        kind=doc["kind"],
        finding_refs=tuple(doc.get("finding_refs", ())),
        interpretation_refs=tuple(doc.get("interpretation_refs", ())),
        regeneration_instruction=doc["regeneration_instruction"],
        target_agent=AgentRole(doc["target_agent"]),
        severity=doc["severity"],
    )


def _finding_values(
    findings: Iterable[FindingItem], parameter: str
) -> list[tuple[int, float | bool | str]]:
    """(index, value) for every finding carrying the parameter, unit-normalized."""
    vocab = get_vocabulary()
    canonical_unit = vocab.parameters[parameter].unit if parameter in vocab.parameters else None
    out: list[tuple[int, float | bool | str]] = []
    for i, item in enumerate(findings):
        pv = item.parameters.get(parameter)
        if pv is None:
            continue
        if canonical_unit is not None and pv.unit is not None:
            if vocab.normalize_unit(parameter, pv.unit) != canonical_unit:
                continue  # unit cannot be reconciled with the rule's canonical unit
        out.append((i, pv.value))
    return out


def _modality_agent(findings: list[FindingItem], refs: tuple[int, ...]) -> AgentRole:
    # Violations rooted in a measured parameter go back to the agent that
    # produced the finding; mixed refs fall back to the metrics agent.
    modalities = {findings[i].source_modality for i in refs}
    if modalities == {Modality.TRACING}:
        return AgentRole.T2F
    return AgentRole.M2F


def regeneration_instruction_text(
    kind: str,
    rule: GuidelineRule | None,
    offending_statements: list[str],
    target_agent: AgentRole,
) -> str:
    """Instruction embedding the guideline sentence verbatim plus the offending items."""
    items = "; ".join(f"{s!r}" for s in offending_statements) or "(none)"
    if kind == ViolationKind.MISSING:
        assert rule is not None
        return (
            f"[to {target_agent.value}] The findings satisfy guideline {rule.id}: the patient has "
            f"{rule.guideline_text}. The interpretation must state this diagnosis "
            f"({rule.required_tag}). Triggering findings: {items}. Regenerate only the missing "
            f"interpretation item in the itemized format."
        )
    if kind == ViolationKind.CONTRADICTED:
        assert rule is not None
        return (
            f"[to {target_agent.value}] The interpretation asserts {rule.required_tag}, but the "
            f"findings do not satisfy guideline {rule.id} ({rule.guideline_text}). Please "
            f"re-examine the patient data, verify the accuracy of the findings for parameter "
            f"{rule.parameter}, and update the affected items: {items}. Respond in the itemized format."
        )
    return (
        f"[to {target_agent.value}] The interpretation items {items} assert a diagnosis with no "
        f"matching guideline and no supporting finding. Provide a supporting finding reference or "
        f"remove the claim. Respond in the itemized format."
    )


def regeneration_instruction(violation: Violation, guidelines: GuidelineSet) -> str:
    """Public accessor used by callers that hold a violation without its text."""
    return violation.regeneration_instruction


def check(
    findings: list[FindingItem] | tuple[FindingItem, ...],
    interpretation: list[InterpretationItem] | tuple[InterpretationItem, ...],
    guidelines: GuidelineSet,
) -> list[Violation]:
    """Evaluate every rule against itemized findings and interpretation.

    - predicate satisfied and required tag absent -> missing_interpretation
    - tag asserted while every relevant finding falsifies the predicate
      (and no sibling rule for the tag is satisfied) -> contradicted_interpretation
    - tag asserted with no rule and no supporting finding -> unsupported (advisory)
    """
    findings = list(findings)
    interpretation = list(interpretation)
    tag_items: dict[str, list[int]] = {}
    for i, item in enumerate(interpretation):
        for tag in item.diagnosis_tags:
            tag_items.setdefault(tag, []).append(i)

    satisfied_tags: set[str] = set()
    evaluations: list[tuple[GuidelineRule, list[int], list[int]]] = []
    for rule in guidelines.rules:
        values = _finding_values(findings, rule.parameter)
        triggered = [i for i, v in values if rule.evaluate(v) is True]
        falsified = [i for i, v in values if rule.evaluate(v) is False]
        if triggered:
            satisfied_tags.add(rule.required_tag)
        evaluations.append((rule, triggered, falsified))

    violations: list[Violation] = []
    for rule, triggered, falsified in evaluations:
        tag_present = rule.required_tag in tag_items
        if triggered and not tag_present:
            refs = tuple(triggered)
            target = AgentRole.F2I  # the diagnosis statement is what is missing
            violations.append(
                Violation(
                    rule_id=rule.id,
                    kind=ViolationKind.MISSING,
                    finding_refs=refs,
                    interpretation_refs=(),
                    regeneration_instruction=regeneration_instruction_text(
                        ViolationKind.MISSING, rule, [findings[i].statement for i in refs], target
                    ),
                    target_agent=target,
                    severity=rule.severity,
                )
            )
        elif tag_present and falsified and not triggered and rule.required_tag not in satisfied_tags:
            refs = tuple(falsified)
            target = _modality_agent(findings, refs)
            offending = [interpretation[i].statement for i in tag_items[rule.required_tag]]
            violations.append(
                Violation(
                    rule_id=rule.id,
                    kind=ViolationKind.CONTRADICTED,
                    finding_refs=refs,
                    interpretation_refs=tuple(tag_items[rule.required_tag]),
                    regeneration_instruction=regeneration_instruction_text(
                        ViolationKind.CONTRADICTED, rule, offending, target
                    ),
                    target_agent=target,
                    severity=rule.severity,
                )
            )

    ruled_tags = {r.required_tag for r in guidelines.rules}
    for tag in sorted(tag_items):
        if tag in ruled_tags:
            continue
        refs = [i for i in tag_items[tag] if not interpretation[i].supports]
        if refs and len(refs) == len(tag_items[tag]):
            target = AgentRole.F2I
            violations.append(
                Violation(
                    rule_id=None,
                    kind=ViolationKind.UNSUPPORTED,
                    finding_refs=(),
                    interpretation_refs=tuple(refs),
                    regeneration_instruction=regeneration_instruction_text(
                        ViolationKind.UNSUPPORTED,
                        None,
                        [interpretation[i].statement for i in refs],
                        target,
                    ),
                    target_agent=target,
                    severity="advisory",
                )
            )

    violations.sort(key=lambda v: (v.rule_id or "~", v.finding_refs, v.interpretation_refs))
    return violations


def mandatory(violations: Iterable[Violation]) -> list[Violation]:
    return [v for v in violations if v.severity == "mandatory"]
