from __future__ import annotations

import time

import pytest
from fastapi.testclient import TestClient

from cardioscribe.domain.bundle_io import bundle_to_json
from cardioscribe.evalharness import MetricId
from cardioscribe.schemas import SCHEMA_NAMES, validate, validator_for
from cardioscribe.service.app import create_app


@pytest.fixture
def client(tmp_path, config):
    app = create_app(tmp_path / "store", configs={"default": config}, workers=2)
    with TestClient(app) as test_client:
        yield test_client


def _run_job(client, bundle):
    job_id = client.post("/v1/jobs", json=bundle_to_json(bundle)).json()["job_id"]
    deadline = time.time() + 10
    while time.time() < deadline:
        doc = client.get(f"/v1/jobs/{job_id}").json()
        if doc["state"]["name"] in ("Complete", "NeedsManualReview", "Failed"):
            return job_id, doc
        time.sleep(0.02)
    raise AssertionError("job did not finish")


def test_every_published_schema_compiles():
    for name in SCHEMA_NAMES:
        validator_for(name)


def test_job_response_validates(client, bundle):
    _, job_doc = _run_job(client, bundle)
    validate("job", job_doc)


def test_report_response_validates(client, bundle):
    job_id, _ = _run_job(client, bundle)
    report_doc = client.get(f"/v1/reports/{job_id}").json()
    validate("report", report_doc)
    for violation in report_doc["violations"]:
        validate("violation", violation)


def test_ratings_response_validates(client):
    rows = [
        {"rater_id": "r1", "patient_id": "P-0001", "model_alias": "Model A",
         "metric": m.value, "score": 4}
        for m in MetricId
    ]
    rows.append({"rater_id": "r1", "patient_id": "P-0001", "model_alias": "Model A",
                 "metric": "ACC", "score": 9})
    body = client.post("/v1/ratings", json=rows).json()
    validate("ratings_result", body)
    assert body["accepted"] == 8


def test_analytics_response_validates(client, bundle):
    _run_job(client, bundle)
    client.post(
        "/v1/ratings",
        json=[{"rater_id": "r1", "patient_id": "P-0001", "model_alias": "Model A",
               "metric": "FFB", "score": 5}],
    )
    body = client.get("/v1/analytics/subgroups", params={"group_by": "model,metric"}).json()
    validate("analytics", body)


def test_bundle_fixture_validates(bundle):
    validate("bundle", bundle_to_json(bundle))


def test_trace_document_validates(bundle, config):
    from cardioscribe.pipeline import run_pipeline

    result = run_pipeline(bundle, config)
    validate("trace", result.trace.to_json())


def test_persisted_trace_validates(client, bundle):
    job_id, _ = _run_job(client, bundle)
    record = client.app.state.service.store.get("trace", job_id)
    assert record is not None
    validate("trace", record.doc)


def test_openapi_document_served(client):
    doc = client.get("/openapi.json").json()
    paths = set(doc["paths"])
    assert {"/v1/jobs", "/v1/jobs/{job_id}", "/v1/reports/{report_id}",
            "/v1/reports/{report_id}/review", "/v1/ratings",
            "/v1/analytics/subgroups", "/v1/images/{image_hash}"} <= paths
