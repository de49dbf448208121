"""Demo bank: cardiologist-adjudicated examples keyed by patient subgroup.

Selection matches the query key exactly, then relaxes dimensions in the fixed
order arrhythmia_class -> age_group -> gender until enough demos are
collected. Within a stratum, demos are sampled by a deterministic hash rank so
the same (bank_version, key, n, seed) always yields the same set; callers get
the demos ordered by (relaxation level, demo id).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from ..agents import AgentRole
from ..domain.types import ArrhythmiaClass, AgeGroup, Gender, SubgroupKey
from ..errors import SchemaError
from ..util import content_hash, stable_rank

DEMOBANK_SCHEMA_VERSION = "demobank/v1"

# Relaxation levels, least relaxed first. Each entry lists the key fields
# that must still match at that level.
RELAXATION_LEVELS: tuple[tuple[str, ...], ...] = (
    ("gender", "age_group", "arrhythmia_class"),
    ("gender", "age_group"),
    ("gender",),
    (),
)


@dataclass(frozen=True)
class Demo:
    id: str
    role: AgentRole
    key: SubgroupKey
    input_excerpt: str
    adjudicated_output: str


@dataclass(frozen=True)
class SelectedDemo:
    demo: Demo
    relaxation_level: int  # 0 = exact match


@dataclass(frozen=True)
class DemoSelection:
    demos: tuple[SelectedDemo, ...]
    zero_shot: bool

    @property
    def demo_ids(self) -> tuple[str, ...]:
        return tuple(s.demo.id for s in self.demos)


class DemoBank:
    def __init__(self, demos: Iterable[Demo], bank_version: str | None = None):
        self.demos: tuple[Demo, ...] = tuple(demos)
        ids = [d.id for d in self.demos]
        if len(ids) != len(set(ids)):
            raise SchemaError("duplicate demo ids in bank")
        if bank_version is None:
            bank_version = content_hash([_demo_to_json(d) for d in self.demos])
        self.bank_version = bank_version

    def for_role(self, role: AgentRole) -> tuple[Demo, ...]:
        return tuple(d for d in self.demos if d.role is role)


def _key_to_json(key: SubgroupKey) -> dict:
    return {
        "gender": key.gender.value,
        "age_group": key.age_group.value,
        "arrhythmia_class": key.arrhythmia_class.label,
    }


def _key_from_json(doc: dict) -> SubgroupKey:
    return SubgroupKey(
        gender=Gender(doc["gender"]),
        age_group=AgeGroup(doc["age_group"]),
        arrhythmia_class=ArrhythmiaClass.from_label(doc["arrhythmia_class"]),
    )


def _demo_to_json(demo: Demo) -> dict:
    return {
        "id": demo.id,
        "role": demo.role.value,
        "key": _key_to_json(demo.key),
        "input_excerpt": demo.input_excerpt,
        "adjudicated_output": demo.adjudicated_output,
    }


def _demo_from_json(doc: dict) -> Demo:
    try:
        return Demo(
            id=doc["id"],
            role=AgentRole(doc["role"]),
            key=_key_from_json(doc["key"]),
            input_excerpt=doc["input_excerpt"],
            adjudicated_output=doc["adjudicated_output"],
        )
    except (KeyError, ValueError) as exc:
        raise SchemaError(f"bad demo record: {exc}") from exc


def bank_to_json(bank: DemoBank) -> dict:
    return {
        "schema_version": DEMOBANK_SCHEMA_VERSION,
        "bank_version": bank.bank_version,
        "demos": [_demo_to_json(d) for d in bank.demos],
    }


def bank_from_json(doc: dict) -> DemoBank:
    if doc.get("schema_version") != DEMOBANK_SCHEMA_VERSION:
        raise SchemaError(f"expected {DEMOBANK_SCHEMA_VERSION}, got {doc.get('schema_version')!r}")
    return DemoBank(
        demos=(_demo_from_json(d) for d in doc["demos"]),
        bank_version=doc.get("bank_version"),
    )


def load_bank(path: str | Path) -> DemoBank:
    return bank_from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def matches_at_level(demo_key: SubgroupKey, query: SubgroupKey, level: int) -> bool:
    for field_name in RELAXATION_LEVELS[level]:
        if getattr(demo_key, field_name) != getattr(query, field_name):
            return False
    return True


def demo_rank(bank_version: str, key: SubgroupKey, seed: int, demo_id: str) -> str:
    """Deterministic sampling rank; lower ranks are picked first within a stratum."""
    return stable_rank(f"{bank_version}|{key}|{seed}|{demo_id}")


def select_demos(
    bank: DemoBank,
    key: SubgroupKey,
    n: int = 3,
    seed: int = 0,
    role: AgentRole | None = None,
) -> DemoSelection:
    """Pick up to ``n`` demos for ``key``; exact matches always precede relaxed ones.

    An empty bank degrades to zero-shot (empty selection, flag set) rather
    than failing.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    pool = bank.for_role(role) if role is not None else bank.demos
    chosen: list[SelectedDemo] = []
    chosen_ids: set[str] = set()
    for level in range(len(RELAXATION_LEVELS)):
        if len(chosen) >= n:
            break
        stratum = [
            d for d in pool if d.id not in chosen_ids and matches_at_level(d.key, key, level)
        ]
        stratum.sort(key=lambda d: demo_rank(bank.bank_version, key, seed, d.id))
        picked = sorted(stratum[: n - len(chosen)], key=lambda d: d.id)
        for demo in picked:
            chosen.append(SelectedDemo(demo=demo, relaxation_level=level))
            chosen_ids.add(demo.id)
    chosen.sort(key=lambda s: (s.relaxation_level, s.demo.id))
    return DemoSelection(demos=tuple(chosen), zero_shot=not chosen)
