"""Rating aggregation and subgroup analysis tables."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from ..domain.types import SubgroupKey
from .metrics import Rating

GROUP_FIELDS = ("model", "metric", "gender", "age_group", "class")


@dataclass(frozen=True)
class AggregateRow:
    group: Mapping[str, str]
    mean: float
    std: float  # population standard deviation
    n: int

    @property
    def formatted(self) -> str:
        return f"{self.mean:.1f} (±{self.std:.1f})"

    def to_json(self) -> dict:
        return {
            "group": dict(self.group),
            "mean": self.mean,
            "std": self.std,
            "n": self.n,
            "formatted": self.formatted,
        }


def _group_value(rating: Rating, field: str, subgroups: Mapping[str, SubgroupKey] | None) -> str | None:
    if field == "model":
        return rating.model_alias
    if field == "metric":
        return rating.metric.value
    if subgroups is None:
        return None
    key = subgroups.get(rating.patient_id)
    if key is None:
        return None
    if field == "gender":
        return key.gender.value
    if field == "age_group":
        return key.age_group.value
    if field == "class":
        return key.arrhythmia_class.label
    return None


def aggregate(
    ratings: Iterable[Rating],
    group_by: tuple[str, ...] | list[str],
    subgroups: Mapping[str, SubgroupKey] | None = None,
) -> list[AggregateRow]:
    """Mean and population std per group; groups with no ratings are omitted.

    Demographic group fields need a patient-id -> subgroup mapping; ratings
    whose patient is unknown there are skipped rather than fabricated.
    """
    for field in group_by:
        if field not in GROUP_FIELDS:
            raise ValueError(f"unknown group_by field {field!r}; expected one of {GROUP_FIELDS}")
    buckets: dict[tuple[str, ...], list[int]] = {}
    for rating in ratings:
        values = [_group_value(rating, f, subgroups) for f in group_by]
        if any(v is None for v in values):
            continue
        buckets.setdefault(tuple(values), []).append(rating.score)

    rows = []
    for key in sorted(buckets):
        scores = buckets[key]
        n = len(scores)
        mean = sum(scores) / n
        variance = sum((s - mean) ** 2 for s in scores) / n
        rows.append(
            AggregateRow(
                group=dict(zip(group_by, key)),
                mean=mean,
                std=math.sqrt(variance),
                n=n,
            )
        )
    return rows


def table_to_csv(rows: list[AggregateRow], group_by: tuple[str, ...] | list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow([*group_by, "mean", "std", "n", "formatted"])
    for row in rows:
        writer.writerow([*(row.group[f] for f in group_by), f"{row.mean:.6g}", f"{row.std:.6g}", row.n, row.formatted])
    return buf.getvalue()


def to_heatmap_json(
    rows: list[AggregateRow], row_field: str, col_field: str
) -> dict:
    """Static heat-map-ready matrix of means (1-5 per cell)."""
    row_keys = sorted({r.group[row_field] for r in rows})
    col_keys = sorted({r.group[col_field] for r in rows})
    cells: list[list[float | None]] = [[None] * len(col_keys) for _ in row_keys]
    for r in rows:
        i = row_keys.index(r.group[row_field])
        j = col_keys.index(r.group[col_field])
        cells[i][j] = round(r.mean, 3)
    return {"rows": row_keys, "cols": col_keys, "values": cells, "scale": [1, 5]}
