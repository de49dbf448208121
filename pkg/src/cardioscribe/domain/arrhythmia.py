"""Arrhythmia classification and subgroup keys.

The class table is a packaged data file covering the full controlled
vocabulary; names are canonicalized (case fold, parentheticals stripped)
before lookup so "Atrial Fibrillation (AF)", "AF", and "atrial fibrillation"
all resolve to the same entry.
"""
from __future__ import annotations

import re
from functools import lru_cache

from ..errors import UnknownArrhythmia
from ..util import load_packaged_json
from .types import ArrhythmiaClass, PatientBundle, SubgroupKey

_PARENTHETICAL_RE = re.compile(r"\([^)]*\)")
_WS_RE = re.compile(r"\s+")


def canonicalize(name: str) -> str:
    """Case-fold, strip parentheticals, collapse whitespace."""
    stripped = _PARENTHETICAL_RE.sub(" ", name)
    return _WS_RE.sub(" ", stripped).strip().casefold()


@lru_cache(maxsize=1)
def _class_table() -> dict[str, ArrhythmiaClass]:
    raw = load_packaged_json("arrhythmia_classes.json")
    table: dict[str, ArrhythmiaClass] = {}
    for label, names in raw["classes"].items():
        cls = ArrhythmiaClass.from_label(label)
        for name in names:
            key = canonicalize(name)
            if key in table and table[key] != cls:
                raise ValueError(f"arrhythmia {name!r} mapped to two classes")
            table[key] = cls
    for alias, target in raw["aliases"].items():
        target_key = canonicalize(target)
        if target_key not in table:
            raise ValueError(f"alias {alias!r} points at unknown arrhythmia {target!r}")
        alias_key = canonicalize(alias)
        table.setdefault(alias_key, table[target_key])
    return table


def vocabulary() -> tuple[str, ...]:
    """All canonical arrhythmia keys the classifier accepts."""
    return tuple(sorted(_class_table()))


def classify_arrhythmia(name: str) -> ArrhythmiaClass:
    key = canonicalize(name)
    table = _class_table()
    if key not in table:
        raise UnknownArrhythmia(f"arrhythmia {name!r} is not in the classification vocabulary")
    return table[key]


def bundle_class(bundle: PatientBundle) -> ArrhythmiaClass:
    """Maximum severity over all tracing tags; Class I when no tags are present."""
    best = ArrhythmiaClass.I
    for tracing in bundle.tracings:
        if tracing.arrhythmia_tag:
            best = max(best, classify_arrhythmia(tracing.arrhythmia_tag))
    return best


def subgroup_key(bundle: PatientBundle) -> SubgroupKey:
    bio = bundle.biostatistics
    return SubgroupKey(
        gender=bio.gender,
        age_group=bio.age_group,
        arrhythmia_class=bundle_class(bundle),
    )
