"""Itemized completion text: parse model output into domain items and back.

Parameter extraction is a declarative pattern table and diagnosis tags come
from a phrase lexicon, both packaged data files, so coverage grows without
code changes.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

from ..domain.types import FindingItem, InterpretationItem, Modality, ParameterValue
from ..domain.vocabulary import get_vocabulary
from ..errors import FormatError
from ..util import load_packaged_json

ITEM_MARKER_RE = re.compile(r"^\s*[-*•]\s+(?P<body>.+?)\s*$")
_HEADER_RE = re.compile(r"^(findings|interpretation)\s*:\s*$", re.IGNORECASE)
_SUPPORTS_RE = re.compile(r"\s*\(supports?:\s*(?P<refs>F\d+(?:\s*,\s*F\d+)*)\s*\)\s*$", re.IGNORECASE)
_TRACING_CUE_RE = re.compile(r"\b(tracings?|ecg image|strip)\b", re.IGNORECASE)
_METRICS_CUE_RE = re.compile(r"\b(metrics?|monitoring period|monitored|24-hour)\b", re.IGNORECASE)

_FALSY_PRESENCE = {"not present", "absent", "not detected"}


@dataclass(frozen=True)
class _Pattern:
    parameter: str
    regex: re.Pattern
    type: str  # number | presence
    unit: str | None


@lru_cache(maxsize=1)
def _patterns() -> tuple[_Pattern, ...]:
    raw = load_packaged_json("parameter_patterns.json")
    compiled = []
    for entry in raw["patterns"]:
        compiled.append(
            _Pattern(
                parameter=entry["parameter"],
                regex=re.compile(entry["pattern"]),
                type=entry["type"],
                unit=entry.get("unit"),
            )
        )
    return tuple(compiled)


@lru_cache(maxsize=1)
def _lexicon() -> tuple[tuple[str, str], ...]:
    raw = load_packaged_json("tag_lexicon.json")
    # Longest phrase first so "prolonged pause" wins over "pause".
    phrases = sorted(raw["phrases"].items(), key=lambda kv: -len(kv[0]))
    return tuple((phrase.casefold(), tag) for phrase, tag in phrases)


def extract_parameters(statement: str) -> dict[str, ParameterValue]:
    """First match per parameter wins; units are normalized to canonical form."""
    vocab = get_vocabulary()
    found: dict[str, ParameterValue] = {}
    for pattern in _patterns():
        if pattern.parameter in found:
            continue
        match = pattern.regex.search(statement)
        if not match:
            continue
        if pattern.type == "presence":
            raw = re.sub(r"\s+", " ", match.group("value").strip().casefold())
            value: float | bool = raw not in _FALSY_PRESENCE
            unit = None
        else:
            value = float(match.group("value"))
            if value.is_integer():
                value = int(value)
            raw_unit = match.groupdict().get("unit") or pattern.unit
            unit = vocab.normalize_unit(pattern.parameter, raw_unit)
        found[pattern.parameter] = ParameterValue(value=value, unit=unit)
    return found


_NEGATION_BEFORE = ("no ", "not ", "without ", "absence of ", "free of ", "denies ",
                    "negative for ", "rules out ", "ruled out ", "excludes ")
_NEGATION_AFTER = ("not present", "absent", "not detected", "was not", "were not",
                   "ruled out", "not seen", "not observed", "not recorded", ": no")


def _is_negated(folded: str, start: int, end: int) -> bool:
    before = folded[max(0, start - 32):start]
    after = folded[end:end + 32]
    return any(cue in before for cue in _NEGATION_BEFORE) or any(
        cue in after for cue in _NEGATION_AFTER
    )


def extract_tags(statement: str) -> frozenset[str]:
    """Lexicon phrase match, longest first; negated mentions do not tag."""
    folded = statement.casefold()
    tags = set()
    claimed: list[tuple[int, int]] = []
    for phrase, tag in _lexicon():
        start = folded.find(phrase)
        while start != -1:
            span = (start, start + len(phrase))
            inside_claimed = any(span[0] >= c[0] and span[1] <= c[1] for c in claimed)
            if not inside_claimed:
                if not _is_negated(folded, *span):
                    tags.add(tag)
                claimed.append(span)
                break
            start = folded.find(phrase, start + 1)
    return frozenset(tags)


def infer_modality(statement: str, default: Modality) -> Modality:
    if _TRACING_CUE_RE.search(statement):
        return Modality.TRACING
    if _METRICS_CUE_RE.search(statement):
        return Modality.METRICS
    return default


def _split_supports(body: str) -> tuple[str, tuple[int, ...]]:
    match = _SUPPORTS_RE.search(body)
    if not match:
        return body, ()
    refs = tuple(int(token.strip()[1:]) - 1 for token in match.group("refs").split(","))
    return body[: match.start()].rstrip(), refs


@dataclass(frozen=True)
class ItemizedParse:
    findings: tuple[FindingItem, ...]
    interpretation: tuple[InterpretationItem, ...]
    unparsed: tuple[str, ...]

    @property
    def items(self) -> tuple:
        return self.findings if self.findings else self.interpretation


def parse_itemized(
    text: str,
    kind: str,
    *,
    source_modality: Modality = Modality.METRICS,
    iteration: int = 0,
) -> ItemizedParse:
    """Split completion text on item markers and lift items into domain types.

    ``kind`` is ``findings`` or ``interpretation``. Non-marker, non-header
    lines are preserved in ``unparsed``. Raises :class:`FormatError` when the
    text is non-empty but no item parses (one re-prompt is allowed upstream).
    """
    if kind not in ("findings", "interpretation"):
        raise ValueError(f"unknown itemized kind {kind!r}")
    findings: list[FindingItem] = []
    interpretation: list[InterpretationItem] = []
    unparsed: list[str] = []
    for line in text.splitlines():
        if not line.strip() or _HEADER_RE.match(line.strip()):
            continue
        marker = ITEM_MARKER_RE.match(line)
        if not marker:
            unparsed.append(line.strip())
            continue
        body = marker.group("body")
        if kind == "findings":
            findings.append(
                FindingItem(
                    statement=body,
                    source_modality=infer_modality(body, source_modality),
                    parameters=extract_parameters(body),
                    agent_iteration=iteration,
                )
            )
        else:
            statement, supports = _split_supports(body)
            interpretation.append(
                InterpretationItem(
                    statement=statement,
                    diagnosis_tags=extract_tags(statement),
                    supports=supports,
                    agent_iteration=iteration,
                )
            )
    if not findings and not interpretation and text.strip():
        raise FormatError(f"no itemized {kind} found in completion of {len(text)} chars")
    return ItemizedParse(
        findings=tuple(findings), interpretation=tuple(interpretation), unparsed=tuple(unparsed)
    )


def render_itemized(items: tuple | list, kind: str | None = None) -> str:
    """Inverse of :func:`parse_itemized` for well-formed items."""
    if kind is None:
        kind = "findings" if items and isinstance(items[0], FindingItem) else "interpretation"
    lines = ["Findings:" if kind == "findings" else "Interpretation:"]
    for item in items:
        if isinstance(item, InterpretationItem) and item.supports:
            refs = ", ".join(f"F{i + 1}" for i in item.supports)
            lines.append(f"- {item.statement} (supports: {refs})")
        else:
            lines.append(f"- {item.statement}")
    return "\n".join(lines)
