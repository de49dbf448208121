from .aggregate import AggregateRow, aggregate, table_to_csv, to_heatmap_json
from .dataset import InstructionRecord, export_finetune_dataset, read_dataset, record_for_bundle
from .metrics import (
    CSV_COLUMNS,
    IngestResult,
    MetricId,
    Rating,
    ingest_ratings,
    parse_ratings_csv,
    ratings_to_csv,
)
from .questionnaire import Questionnaire, QuestionnaireSection, build_questionnaire
from .stability import (
    Embedder,
    HttpEmbedder,
    StabilityScore,
    TokenHashEmbedder,
    pairwise_cosine_similarities,
    stability_score,
)

__all__ = [
    "AggregateRow",
    "CSV_COLUMNS",
    "Embedder",
    "HttpEmbedder",
    "IngestResult",
    "InstructionRecord",
    "MetricId",
    "Questionnaire",
    "QuestionnaireSection",
    "Rating",
    "StabilityScore",
    "TokenHashEmbedder",
    "aggregate",
    "build_questionnaire",
    "export_finetune_dataset",
    "ingest_ratings",
    "pairwise_cosine_similarities",
    "parse_ratings_csv",
    "ratings_to_csv",
    "read_dataset",
    "record_for_bundle",
    "stability_score",
    "table_to_csv",
    "to_heatmap_json",
]
