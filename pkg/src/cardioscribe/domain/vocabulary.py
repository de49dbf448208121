"""Canonical metric vocabulary: parameter names, units, and valid ranges.

The vocabulary ships as a versioned data file so it can grow without code
changes. Unknown attributes are never rejected, only flagged non-canonical.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from ..util import load_packaged_json


@dataclass(frozen=True)
class ParameterSpec:
    name: str
    unit: str | None
    unit_aliases: tuple[str, ...]
    kind: str  # percentage | duration | count | rate | presence
    range: tuple[float | None, float | None] | None


@dataclass(frozen=True)
class AttributeSpec:
    attribute: str
    parameter: str
    unit: str


class MetricVocabulary:
    """Lookup helpers over the packaged vocabulary file."""

    def __init__(self, raw: dict):
        self.version = raw["schema_version"]
        self.parameters: dict[str, ParameterSpec] = {}
        for name, spec in raw["parameters"].items():
            rng = spec.get("range")
            self.parameters[name] = ParameterSpec(
                name=name,
                unit=spec.get("unit"),
                unit_aliases=tuple(spec.get("unit_aliases", ())),
                kind=spec["kind"],
                range=(rng[0], rng[1]) if rng else None,
            )
        self.attributes: dict[str, AttributeSpec] = {}
        for attr, spec in raw["metric_attributes"].items():
            self.attributes[attr.casefold()] = AttributeSpec(
                attribute=attr, parameter=spec["parameter"], unit=spec["unit"]
            )

    def is_parameter(self, name: str) -> bool:
        return name in self.parameters

    def attribute_spec(self, attribute: str) -> AttributeSpec | None:
        return self.attributes.get(attribute.casefold())

    def normalize_unit(self, parameter: str, unit: str | None) -> str | None:
        """Map a unit alias to the parameter's canonical unit; None if unmappable."""
        spec = self.parameters.get(parameter)
        if spec is None:
            return unit
        if unit is None:
            return spec.unit
        folded = unit.strip().casefold()
        if spec.unit is not None and folded == spec.unit.casefold():
            return spec.unit
        for alias in spec.unit_aliases:
            if folded == alias.casefold():
                return spec.unit
        return None

    def in_range(self, parameter: str, value: float) -> bool:
        spec = self.parameters.get(parameter)
        if spec is None or spec.range is None:
            return True
        lo, hi = spec.range
        if lo is not None and value < lo:
            return False
        if hi is not None and value > hi:
            return False
        return True


@lru_cache(maxsize=1)
def get_vocabulary() -> MetricVocabulary:
    return MetricVocabulary(load_packaged_json("metric_vocabulary.json"))
