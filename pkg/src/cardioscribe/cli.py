"""Command-line entry points wrapping the engine's module operations.

Exit codes: 0 success, 1 validation error, 2 internal error. Output is JSON
on stdout unless ``--format text``.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import CardioscribeError, RuleSchemaError, SchemaError
from .util import canonical_json

VALIDATION_EXIT = 1
INTERNAL_EXIT = 2


def _emit(obj, fmt: str = "json", text: str | None = None) -> None:
    if fmt == "text" and text is not None:
        click.echo(text)
    else:
        sys.stdout.write(canonical_json(obj))


def _read_bundle(path: Path):
    from .domain.bundle_io import parse_bundle

    fmt = "csv+manifest" if path.suffix == ".manifest" else "json"
    return parse_bundle(path.read_bytes(), format=fmt, base_dir=path.parent)


@click.group()
def main():
    """Multi-agent arrhythmia reporting engine."""


@main.command()
@click.argument("bundle_path", type=click.Path(exists=True, path_type=Path))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="json")
def run(bundle_path: Path, config_path: Path, fmt: str):
    """Run the full pipeline on one patient bundle and print the report."""
    from .pipeline import run_pipeline
    from .reporting import render
    from .service.config import load_pipeline_config

    try:
        bundle = _read_bundle(bundle_path)
        config = load_pipeline_config(config_path)
    except (SchemaError, CardioscribeError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(VALIDATION_EXIT)
    try:
        result = run_pipeline(bundle, config)
    except CardioscribeError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(INTERNAL_EXIT)
    if fmt == "text":
        click.echo(render(result.report, "text").decode("utf-8"))
    else:
        sys.stdout.write(render(result.report, "json").decode("utf-8"))
    if result.report.meta.state == "Failed":
        sys.exit(INTERNAL_EXIT)


@main.command()
@click.option("--port", default=8080, type=int)
@click.option("--host", default="127.0.0.1")
@click.option("--store", "store_path", required=True, type=click.Path(path_type=Path))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--auth-token", default=None, help="Optional static bearer token.")
@click.option("--workers", default=None, type=int)
def serve(port: int, host: str, store_path: Path, config_path: Path, auth_token: str | None, workers):
    """Start the HTTP service."""
    import uvicorn

    from .service.app import create_app

    app = create_app(store_path, config_path=config_path, auth_token=auth_token, workers=workers)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.argument("report_path", type=click.Path(exists=True, path_type=Path))
@click.option("--guidelines", "guidelines_path", default=None, type=click.Path(exists=True, path_type=Path))
def factcheck(report_path: Path, guidelines_path: Path | None):
    """Re-run the guideline fact-check over a rendered report."""
    from .factcheck import check, default_guidelines, load_guidelines
    from .reporting import parse_report

    try:
        report = parse_report(report_path.read_bytes())
        guidelines = load_guidelines(guidelines_path) if guidelines_path else default_guidelines()
    except (SchemaError, RuleSchemaError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(VALIDATION_EXIT)
    violations = check(report.findings, report.interpretation, guidelines)
    _emit([v.to_json() for v in violations])
    if violations:
        sys.exit(VALIDATION_EXIT)


@main.group(name="demo-bank")
def demo_bank():
    """Demo bank maintenance."""


@demo_bank.command(name="build")
@click.argument("bundle_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
def demo_bank_build(bundle_dir: Path, out_path: Path):
    """Build a demo bank JSON from a directory of adjudicated bundles."""
    from .prompting.bankbuild import build_bank
    from .prompting.demos import bank_to_json

    bundles = []
    try:
        for path in sorted(bundle_dir.glob("*.json")):
            bundles.append(_read_bundle(path))
        bank = build_bank(bundles)
    except (SchemaError, CardioscribeError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(VALIDATION_EXIT)
    out_path.write_text(canonical_json(bank_to_json(bank)), encoding="utf-8")
    _emit({"demos": len(bank.demos), "bank_version": bank.bank_version, "path": str(out_path)})


@main.group()
def eval():
    """Clinical-validation helpers."""


@eval.command()
@click.argument("csv_path", type=click.Path(exists=True, path_type=Path))
@click.option("--group-by", default="model,metric", help="Comma-separated group fields.")
@click.option("--csv-out", default=None, type=click.Path(path_type=Path))
@click.option("--heatmap-out", default=None, type=click.Path(path_type=Path))
def aggregate(csv_path: Path, group_by: str, csv_out: Path | None, heatmap_out: Path | None):
    """Aggregate a ratings CSV into mean (±std) rows."""
    from .evalharness.aggregate import aggregate as run_aggregate
    from .evalharness.aggregate import table_to_csv, to_heatmap_json
    from .evalharness.metrics import parse_ratings_csv

    fields = tuple(f.strip() for f in group_by.split(",") if f.strip())
    try:
        result = parse_ratings_csv(csv_path.read_text(encoding="utf-8"))
        rows = run_aggregate(result.accepted, group_by=fields)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(VALIDATION_EXIT)
    if csv_out is not None:
        csv_out.write_text(table_to_csv(rows, fields), encoding="utf-8")
    if heatmap_out is not None and len(fields) == 2:
        heatmap_out.write_text(
            canonical_json(to_heatmap_json(rows, fields[0], fields[1])), encoding="utf-8"
        )
    _emit({"group_by": list(fields), "rows": [r.to_json() for r in rows],
           "rejected": [dict(r) for r in result.rejected]})


@eval.command()
@click.argument("texts_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--endpoint", default=None, help="HTTP embedding endpoint; default is the hashed-token embedder.")
def stability(texts_dir: Path, endpoint: str | None):
    """Stability score over a directory of repeated generation outputs."""
    from .errors import TooFewRuns
    from .evalharness.stability import HttpEmbedder, stability_score

    texts = [p.read_text(encoding="utf-8") for p in sorted(texts_dir.glob("*.txt"))]
    embedder = HttpEmbedder(endpoint) if endpoint else None
    try:
        score = stability_score(texts, embedder=embedder)
    except TooFewRuns as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(VALIDATION_EXIT)
    _emit({"variance": score.variance, "n_runs": score.n_runs})


@main.group()
def dataset():
    """Fine-tuning dataset export."""


@dataset.command()
@click.argument("bundle_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--role", required=True, type=click.Choice(["M2F", "T2F", "F2I"]))
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--guidelines", "guidelines_path", default=None, type=click.Path(exists=True, path_type=Path))
def export(bundle_dir: Path, role: str, out_path: Path, guidelines_path: Path | None):
    """Export instruction records (one JSON object per line) for one agent role."""
    from .agents import AgentRole
    from .errors import MissingAdjudication
    from .evalharness.dataset import export_finetune_dataset
    from .factcheck import default_guidelines, load_guidelines

    try:
        bundles = [_read_bundle(p) for p in sorted(bundle_dir.glob("*.json"))]
        guidelines = load_guidelines(guidelines_path) if guidelines_path else default_guidelines()
        count = export_finetune_dataset(bundles, AgentRole(role), out_path, guidelines=guidelines)
    except (MissingAdjudication, SchemaError, CardioscribeError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(VALIDATION_EXIT)
    _emit({"records": count, "role": role, "path": str(out_path)})


if __name__ == "__main__":
    main()
