"""Clinical-validation metric ids and rating records."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum


class MetricId(str, Enum):
    ACC = "ACC"  # accuracy
    CPL = "CPL"  # completeness
    ORG = "ORG"  # organization
    CPH = "CPH"  # comprehensibility
    SCI = "SCI"  # succinctness
    CNS = "CNS"  # consistency
    FFH = "FFH"  # free from hallucination
    FFB = "FFB"  # free from bias

    @property
    def domain(self) -> str:
        return "clinic" if self in _CLINIC else "security"


_CLINIC = {MetricId.ACC, MetricId.CPL, MetricId.ORG, MetricId.CPH, MetricId.SCI}

SCORE_MIN = 1
SCORE_MAX = 5


@dataclass(frozen=True)
class Rating:
    rater_id: str
    patient_id: str
    model_alias: str
    metric: MetricId
    score: int

    def __post_init__(self):
        if not SCORE_MIN <= self.score <= SCORE_MAX:
            raise ValueError(f"score must be in [{SCORE_MIN}, {SCORE_MAX}], got {self.score}")
        for field_name in ("rater_id", "patient_id", "model_alias"):
            if not getattr(self, field_name):
                raise ValueError(f"{field_name} must be non-empty")

    @property
    def key(self) -> tuple[str, str, str, str]:
        return (self.rater_id, self.patient_id, self.model_alias, self.metric.value)

    def to_json(self) -> dict:
        return {
            "rater_id": self.rater_id,
            "patient_id": self.patient_id,
            "model_alias": self.model_alias,
            "metric": self.metric.value,
            "score": self.score,
        }


CSV_COLUMNS = ("rater_id", "patient_id", "model_alias", "metric", "score")


@dataclass(frozen=True)
class IngestResult:
    accepted: tuple[Rating, ...]
    rejected: tuple[dict, ...]  # {"row": .., "reason": ..}


def _parse_record(doc: dict, seen: set, row_no: int, rejected: list[dict]) -> Rating | None:
    try:
        rating = Rating(
            rater_id=str(doc["rater_id"]).strip(),
            patient_id=str(doc["patient_id"]).strip(),
            model_alias=str(doc["model_alias"]).strip(),
            metric=MetricId(str(doc["metric"]).strip().upper()),
            score=int(doc["score"]),
        )
    except (KeyError, ValueError) as exc:
        rejected.append({"row": row_no, "reason": f"{type(exc).__name__}: {exc}"})
        return None
    if rating.key in seen:
        rejected.append({"row": row_no, "reason": f"duplicate rating key {rating.key}"})
        return None
    seen.add(rating.key)
    return rating


def ingest_ratings(
    records: list[dict], existing_keys: set[tuple[str, str, str, str]] | None = None
) -> IngestResult:
    """Validate rating dicts; duplicates are rejected with reasons, never averaged."""
    seen = set(existing_keys or ())
    accepted: list[Rating] = []
    rejected: list[dict] = []
    for row_no, doc in enumerate(records, start=1):
        rating = _parse_record(doc, seen, row_no, rejected)
        if rating is not None:
            accepted.append(rating)
    return IngestResult(accepted=tuple(accepted), rejected=tuple(rejected))


def parse_ratings_csv(
    text: str, existing_keys: set[tuple[str, str, str, str]] | None = None
) -> IngestResult:
    """CSV with header ``rater_id,patient_id,model_alias,metric,score``."""
    reader = csv.DictReader(io.StringIO(text))
    missing = [c for c in CSV_COLUMNS if c not in (reader.fieldnames or ())]
    if missing:
        raise ValueError(f"ratings CSV missing columns: {', '.join(missing)}")
    return ingest_ratings(list(reader), existing_keys=existing_keys)


def ratings_to_csv(ratings: list[Rating]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(CSV_COLUMNS)
    for r in ratings:
        writer.writerow([r.rater_id, r.patient_id, r.model_alias, r.metric.value, r.score])
    return buf.getvalue()
