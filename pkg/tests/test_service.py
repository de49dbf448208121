from __future__ import annotations

import json
import time

import pytest
from fastapi.testclient import TestClient

import helpers
from cardioscribe.domain.bundle_io import bundle_to_json
from cardioscribe.evalharness import MetricId, Rating, aggregate
from cardioscribe.reporting import parse_report
from cardioscribe.service.app import create_app


@pytest.fixture
def app(tmp_path, bundle, config):
    return create_app(tmp_path / "store", configs={"default": config}, workers=2)


@pytest.fixture
def client(app):
    with TestClient(app) as test_client:
        yield test_client


def _submit(client, bundle, **kwargs):
    response = client.post("/v1/jobs", json=bundle_to_json(bundle), **kwargs)
    assert response.status_code == 202, response.text
    return response.json()["job_id"]


def _wait_terminal(client, job_id, timeout=10.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        doc = client.get(f"/v1/jobs/{job_id}").json()
        if doc["state"]["name"] in ("Complete", "NeedsManualReview", "Failed"):
            return doc
        time.sleep(0.02)
    raise AssertionError(f"job {job_id} did not finish: {doc}")


# --- submit / poll / fetch ------------------------------------------------------

def test_submit_poll_fetch_flow(client, bundle):
    job_id = _submit(client, bundle)
    job = _wait_terminal(client, job_id)
    assert job["state"]["name"] == "Complete"
    assert job["report_key"] == job_id

    response = client.get(f"/v1/reports/{job_id}")
    assert response.status_code == 200
    report = parse_report(json.dumps(response.json()).encode())
    assert report.meta.state == "Complete"
    assert "ETag" in response.headers


def test_missing_metrics_is_400_with_pointer(client, bundle):
    doc = bundle_to_json(bundle)
    del doc["metrics"]
    response = client.post("/v1/jobs", json=doc)
    assert response.status_code == 400
    assert "metrics" in response.json()["error"]


def test_unknown_job_404(client):
    assert client.get("/v1/jobs/nope").status_code == 404
    assert client.get("/v1/reports/nope").status_code == 404


def test_idempotent_resubmission(client, bundle):
    headers = {"Idempotency-Key": "abc-123"}
    first = _submit(client, bundle, headers=headers)
    second = _submit(client, bundle, headers=headers)
    assert first == second
    different = _submit(client, bundle, headers={"Idempotency-Key": "other"})
    assert different != first


def test_oversize_bundle_413(tmp_path, config, bundle):
    app = create_app(tmp_path / "s2", configs={"default": config}, max_body_bytes=512)
    with TestClient(app) as client:
        response = client.post("/v1/jobs", json=bundle_to_json(bundle))
        assert response.status_code == 413


def test_report_fetch_while_running_409(tmp_path, bundle, bank):
    slow = helpers.scripted_config(bundle, bank)
    slow_tables = {role: dict(a.backend.script_table) for role, a in slow.agents.items()}
    from cardioscribe.agents import AgentConfig, AgentRole, BackendHandle
    from cardioscribe.pipeline import PipelineConfig

    agents = {
        role: AgentConfig(
            role=role,
            backend=BackendHandle(kind="scripted", script_table=slow_tables[role], latency_ms=400),
            model_name=f"scripted-{role.value.lower()}",
            params=helpers.PARAMS,
            vision=role is AgentRole.T2F,
        )
        for role in slow_tables
    }
    config = PipelineConfig(
        agents=agents,
        demo_bank=slow.demo_bank,
        guidelines=slow.guidelines,
        demo_seed=helpers.DEMO_SEED,
        created_at_override=helpers.FIXED_TIME,
    )
    app = create_app(tmp_path / "s4", configs={"default": config}, workers=2)
    with TestClient(app) as client:
        job_id = _submit(client, bundle)
        response = client.get(f"/v1/reports/{job_id}")
        assert response.status_code == 409
        assert "state" in response.json()
        _wait_terminal(client, job_id)


def test_needs_manual_review_report_carries_violations(tmp_path, bundle, bank):
    stubborn = helpers.scripted_config(
        bundle,
        bank,
        f2i_completion=helpers.F2I_OMITS_AVBLOCK,
        f2i_regen_completion=helpers.F2I_REGEN_NOFIX,
        max_factcheck_retries=2,
    )
    app = create_app(tmp_path / "s5", configs={"default": stubborn}, workers=2)
    with TestClient(app) as client:
        job_id = _submit(client, bundle)
        job = _wait_terminal(client, job_id)
        assert job["state"]["name"] == "NeedsManualReview"
        report = client.get(f"/v1/reports/{job_id}").json()
        assert report["meta"]["state"] == "NeedsManualReview"
        assert any(v["rule_id"] == "pr-interval-prolonged" for v in report["violations"])


def test_html_report_via_accept_header(client, bundle):
    job_id = _submit(client, bundle)
    _wait_terminal(client, job_id)
    response = client.get(f"/v1/reports/{job_id}", headers={"Accept": "text/html"})
    assert response.status_code == 200
    assert response.headers["content-type"].startswith("text/html")
    assert '<section id="findings">' in response.text


# --- review -----------------------------------------------------------------------

def test_review_edit_and_status_flow(client, bundle):
    job_id = _submit(client, bundle)
    _wait_terminal(client, job_id)
    fetched = client.get(f"/v1/reports/{job_id}")
    revision = int(fetched.headers["ETag"])
    target = fetched.json()["interpretation"][0]["statement"]

    response = client.post(
        f"/v1/reports/{job_id}/review",
        json={
            "revision": revision,
            "reviewer_id": "dr-a",
            "status": "reviewed",
            "edits": [
                {
                    "target_kind": "interpretation",
                    "target_index": 0,
                    "old_text": target,
                    "new_text": "Edited statement.",
                }
            ],
        },
    )
    assert response.status_code == 200, response.text
    doc = response.json()
    assert doc["interpretation"][0]["statement"] == "Edited statement."
    assert len(doc["review"]["edits"]) == 1
    assert doc["review"]["status"] == "reviewed"

    # stale revision is a conflict
    stale = client.post(
        f"/v1/reports/{job_id}/review",
        json={"revision": revision, "reviewer_id": "dr-a", "edits": []},
    )
    assert stale.status_code == 409

    # old_text mismatch is 422
    current_revision = int(response.headers["ETag"])
    mismatch = client.post(
        f"/v1/reports/{job_id}/review",
        json={
            "revision": current_revision,
            "reviewer_id": "dr-a",
            "edits": [
                {
                    "target_kind": "interpretation",
                    "target_index": 0,
                    "old_text": "not the current text",
                    "new_text": "x",
                }
            ],
        },
    )
    assert mismatch.status_code == 422


def test_signed_before_reviewed_is_400(client, bundle):
    job_id = _submit(client, bundle)
    _wait_terminal(client, job_id)
    revision = int(client.get(f"/v1/reports/{job_id}").headers["ETag"])
    response = client.post(
        f"/v1/reports/{job_id}/review",
        json={"revision": revision, "reviewer_id": "dr-a", "status": "signed", "edits": []},
    )
    assert response.status_code == 400


def test_review_status_forward_only(client, bundle):
    job_id = _submit(client, bundle)
    _wait_terminal(client, job_id)
    revision = int(client.get(f"/v1/reports/{job_id}").headers["ETag"])
    reviewed = client.post(
        f"/v1/reports/{job_id}/review",
        json={"revision": revision, "reviewer_id": "dr-a", "status": "reviewed", "edits": []},
    )
    signed = client.post(
        f"/v1/reports/{job_id}/review",
        json={"revision": int(reviewed.headers["ETag"]), "reviewer_id": "dr-a",
              "status": "signed", "edits": []},
    )
    assert signed.status_code == 200
    back = client.post(
        f"/v1/reports/{job_id}/review",
        json={"revision": int(signed.headers["ETag"]), "reviewer_id": "dr-a",
              "status": "reviewed", "edits": []},
    )
    assert back.status_code == 400


# --- ratings and analytics -----------------------------------------------------------

def test_ratings_accept_and_reject(client):
    rows = [
        {"rater_id": "r1", "patient_id": "P-0001", "model_alias": "Model A",
         "metric": m.value, "score": 5}
        for m in MetricId
    ]
    rows.append(dict(rows[0]))  # duplicate
    response = client.post("/v1/ratings", json=rows)
    assert response.status_code == 200
    body = response.json()
    assert body["accepted"] == 8
    assert len(body["rejected"]) == 1
    assert "duplicate" in body["rejected"][0]["reason"]


def test_ratings_csv_ingestion(client):
    csv_body = (
        "rater_id,patient_id,model_alias,metric,score\n"
        "r9,P-0009,Model B,ACC,4\n"
    )
    response = client.post(
        "/v1/ratings", content=csv_body, headers={"Content-Type": "text/csv"}
    )
    assert response.json()["accepted"] == 1


def test_analytics_equals_direct_aggregate(client, bundle):
    job_id = _submit(client, bundle)
    _wait_terminal(client, job_id)
    ratings = [
        Rating(rater_id=f"r{i}", patient_id="P-0001", model_alias="Model A",
               metric=MetricId.FFB, score=s)
        for i, s in enumerate([4, 4, 4, 5, 5])
    ]
    client.post("/v1/ratings", json=[r.to_json() for r in ratings])
    response = client.get("/v1/analytics/subgroups", params={"group_by": "model,metric"})
    assert response.status_code == 200
    rows = response.json()["rows"]
    expected = [r.to_json() for r in aggregate(ratings, group_by=("model", "metric"))]
    assert rows == expected

    by_class = client.get("/v1/analytics/subgroups", params={"group_by": "class,metric"})
    assert by_class.json()["rows"][0]["group"] == {"class": "II", "metric": "FFB"}


def test_analytics_unknown_field_400(client):
    response = client.get("/v1/analytics/subgroups", params={"group_by": "flavor"})
    assert response.status_code == 400


# --- auth -------------------------------------------------------------------------

def test_auth_enabled_rejects_missing_token(tmp_path, config, bundle):
    app = create_app(tmp_path / "s3", configs={"default": config}, auth_token="sekrit")
    with TestClient(app) as client:
        assert client.post("/v1/jobs", json=bundle_to_json(bundle)).status_code == 401
        ok = client.post(
            "/v1/jobs",
            json=bundle_to_json(bundle),
            headers={"Authorization": "Bearer sekrit"},
        )
        assert ok.status_code == 202


# --- images ------------------------------------------------------------------------

def test_image_route_serves_store_file(app, bundle):
    with TestClient(app) as client:
        store_root = app.state.service.store.root
        (store_root / "images").mkdir(parents=True, exist_ok=True)
        (store_root / "images" / ("a" * 64)).write_bytes(b"\x89PNG fake")
        response = client.get(f"/v1/images/{'a' * 64}")
        assert response.status_code == 200
        assert response.content == b"\x89PNG fake"
        assert client.get(f"/v1/images/{'f' * 64}").status_code == 404
