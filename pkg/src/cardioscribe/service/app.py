"""HTTP service: upload bundles, run pipeline jobs, review reports, ingest
ratings, query subgroup analytics.

Jobs live in the file store; a bounded worker pool consumes the queue. On
startup any job found mid-flight is reset to Queued and re-run, so a crash
never leaves a torn report: the report document is written atomically before
the job turns terminal.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import asynccontextmanager
from dataclasses import replace
from pathlib import Path
from typing import Mapping
from uuid import uuid4

from fastapi import FastAPI, Header, Query, Request, Response
from fastapi.responses import JSONResponse

from ..domain.arrhythmia import subgroup_key
from ..domain.bundle_io import bundle_from_json, bundle_to_json
from ..domain.types import AgeGroup, ArrhythmiaClass, Gender, SubgroupKey
from ..errors import CardioscribeError, SchemaError, StoreConflict
from ..evalharness.aggregate import GROUP_FIELDS, aggregate
from ..evalharness.metrics import Rating, MetricId, ingest_ratings, parse_ratings_csv
from ..pipeline import RUNNING_STATES, TERMINAL_STATES, JobState, run_pipeline
from ..reporting import apply_edits, render, report_from_json, report_to_json
from ..service.config import load_pipeline_config
from ..service.store import FileStore
from ..util import sha256_hex, utc_now_iso


def _error(status: int, message: str, **extra) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message, **extra})


class ServiceState:
    def __init__(
        self,
        store: FileStore,
        configs: Mapping[str, object],
        auth_token: str | None,
        max_body_bytes: int,
        workers: int,
    ):
        self.store = store
        self.configs = dict(configs)
        self.auth_token = auth_token
        self.max_body_bytes = max_body_bytes
        self.executor = ThreadPoolExecutor(max_workers=workers)

    # -- job execution ------------------------------------------------------

    def enqueue(self, job_id: str) -> None:
        self.executor.submit(self._run_job, job_id)

    def _load_image(self, ref: str) -> bytes:
        """Hash refs resolve into the store's image directory; paths from disk."""
        if ref.startswith("sha256:"):
            return (self.store.root / "images" / ref.removeprefix("sha256:")).read_bytes()
        return Path(ref).read_bytes()

    def _with_store_images(self, config):
        agents = {
            role: replace(agent, backend=replace(agent.backend, image_loader=self._load_image))
            for role, agent in config.agents.items()
        }
        return replace(config, agents=agents)

    def _run_job(self, job_id: str) -> None:
        job_record = self.store.get("job", job_id)
        if job_record is None or job_record.doc["state"]["name"] != "Queued":
            return  # claimed by another worker or already terminal
        bundle_record = self.store.get("bundle", job_id)
        if bundle_record is None:
            return
        config = self.configs.get(job_record.doc["config_id"])
        if config is None:
            self._finish_job(job_id, JobState("Failed", reason="unknown config"), report_key=None)
            return
        bundle = bundle_from_json(bundle_record.doc)

        revision = {"value": job_record.revision}

        def on_state(state: JobState) -> None:
            if state.name in TERMINAL_STATES:
                return  # terminal states are written after the report lands
            record = self.store.get("job", job_id)
            doc = dict(record.doc)
            doc["state"] = state.to_json()
            doc["updated_at"] = utc_now_iso()
            self.store.put("job", job_id, doc, expected_revision=revision["value"])
            revision["value"] += 1

        try:
            result = run_pipeline(bundle, self._with_store_images(config), on_state=on_state)
        except StoreConflict:
            return  # another worker claimed the job mid-run
        except Exception as exc:  # a stuck running job would never recover
            self._finish_job(job_id, JobState("Failed", reason=f"{type(exc).__name__}: {exc}"),
                             report_key=None)
            return
        # Report first (atomic write), then the terminal job state; a crash in
        # between re-runs the job and simply overwrites the report.
        self.store.upsert("report", job_id, report_to_json(result.report))
        self.store.upsert("trace", job_id, result.trace.to_json())
        self._finish_job(job_id, result.states[-1], report_key=job_id)

    def _finish_job(self, job_id: str, state: JobState, report_key: str | None) -> None:
        record = self.store.get("job", job_id)
        if record is None:
            return
        doc = dict(record.doc)
        doc["state"] = state.to_json()
        doc["report_key"] = report_key
        doc["updated_at"] = utc_now_iso()
        try:
            self.store.put("job", job_id, doc, expected_revision=record.revision)
        except StoreConflict:
            pass

    def recover(self) -> None:
        """Reset jobs found mid-flight and re-enqueue everything runnable."""
        for record in self.store.records("job"):
            doc = dict(record.doc)
            state_name = doc["state"]["name"]
            if state_name in RUNNING_STATES:
                doc["state"] = {"name": "Queued"}
                doc["updated_at"] = utc_now_iso()
                try:
                    self.store.put("job", doc["job_id"], doc, expected_revision=record.revision)
                except StoreConflict:
                    continue
                state_name = "Queued"
            if state_name == "Queued":
                self.enqueue(doc["job_id"])


def create_app(
    store_path: str | Path,
    configs: Mapping[str, object] | None = None,
    config_path: str | Path | None = None,
    auth_token: str | None = None,
    max_body_bytes: int = 4 * 1024 * 1024,
    workers: int | None = None,
) -> FastAPI:
    if configs is None:
        configs = {}
    if config_path is not None:
        configs = {**configs, "default": load_pipeline_config(config_path)}
    state = ServiceState(
        store=FileStore(store_path),
        configs=configs,
        auth_token=auth_token or os.environ.get("CARDIOSCRIBE_AUTH_TOKEN"),
        max_body_bytes=max_body_bytes,
        workers=workers or os.cpu_count() or 2,
    )

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        state.recover()
        yield
        state.executor.shutdown(wait=False)

    app = FastAPI(title="cardioscribe", version="1.0.0", lifespan=lifespan)
    app.state.service = state

    def _unauthorized(request: Request) -> JSONResponse | None:
        if state.auth_token is None:
            return None
        header = request.headers.get("authorization", "")
        if header != f"Bearer {state.auth_token}":
            return _error(401, "missing or invalid bearer token")
        return None

    # -- jobs ---------------------------------------------------------------

    @app.post("/v1/jobs", status_code=202)
    async def submit_job(
        request: Request,
        config: str = Query(default="default"),
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        if (denied := _unauthorized(request)) is not None:
            return denied
        body = await request.body()
        if len(body) > state.max_body_bytes:
            return _error(413, f"bundle exceeds {state.max_body_bytes} bytes")
        if config not in state.configs:
            return _error(400, f"unknown config id {config!r}")
        try:
            bundle = bundle_from_json(json.loads(body.decode("utf-8")))
        except SchemaError as exc:
            return _error(400, str(exc), pointer=exc.pointer)
        except (ValueError, CardioscribeError) as exc:
            return _error(400, str(exc))

        idem_key = sha256_hex(idempotency_key.encode())[:32] if idempotency_key else None
        if idem_key is not None:
            existing = state.store.get("idem", idem_key)
            if existing is not None:
                return {"job_id": existing.doc["job_id"]}

        job_id = f"job-{uuid4().hex[:12]}"
        now = utc_now_iso()
        state.store.put("bundle", job_id, bundle_to_json(bundle), expected_revision=None)
        key = subgroup_key(bundle)
        state.store.upsert(
            "patient",
            bundle.biostatistics.patient_id,
            {
                "patient_id": bundle.biostatistics.patient_id,
                "gender": key.gender.value,
                "age_group": key.age_group.value,
                "arrhythmia_class": key.arrhythmia_class.label,
            },
        )
        state.store.put(
            "job",
            job_id,
            {
                "job_id": job_id,
                "config_id": config,
                "state": {"name": "Queued"},
                "report_key": None,
                "patient_id": bundle.biostatistics.patient_id,
                "created_at": now,
                "updated_at": now,
            },
            expected_revision=None,
        )
        if idem_key is not None:
            try:
                state.store.put("idem", idem_key, {"job_id": job_id}, expected_revision=None)
            except StoreConflict:
                existing = state.store.get("idem", idem_key)
                if existing is not None:
                    return {"job_id": existing.doc["job_id"]}
        state.enqueue(job_id)
        return {"job_id": job_id}

    @app.get("/v1/jobs/{job_id}")
    async def get_job(job_id: str, request: Request):
        if (denied := _unauthorized(request)) is not None:
            return denied
        record = state.store.get("job", job_id)
        if record is None:
            return _error(404, f"unknown job {job_id!r}")
        return record.doc

    # -- reports ------------------------------------------------------------

    @app.get("/v1/reports/{report_id}")
    async def get_report(report_id: str, request: Request):
        if (denied := _unauthorized(request)) is not None:
            return denied
        job = state.store.get("job", report_id)
        record = state.store.get("report", report_id)
        if job is None and record is None:
            return _error(404, f"unknown report {report_id!r}")
        if record is None or (job is not None and job.doc["state"]["name"] not in TERMINAL_STATES):
            job_state = job.doc["state"] if job is not None else {"name": "unknown"}
            return JSONResponse(status_code=409, content={"error": "report not ready", "state": job_state})
        accept = request.headers.get("accept", "")
        if "text/html" in accept:
            report = report_from_json(record.doc)
            return Response(
                content=render(report, "html"),
                media_type="text/html",
                headers={"ETag": str(record.revision)},
            )
        return JSONResponse(content=record.doc, headers={"ETag": str(record.revision)})

    @app.post("/v1/reports/{report_id}/review")
    async def review_report(report_id: str, request: Request):
        if (denied := _unauthorized(request)) is not None:
            return denied
        record = state.store.get("report", report_id)
        if record is None:
            return _error(404, f"unknown report {report_id!r}")
        try:
            body = await request.json()
        except Exception:
            return _error(400, "body must be JSON")
        revision = body.get("revision")
        if revision != record.revision:
            return JSONResponse(
                status_code=409,
                content={"error": "revision conflict", "expected": record.revision, "got": revision},
            )
        report = report_from_json(record.doc)
        try:
            updated = apply_edits(
                report,
                edits=body.get("edits", []),
                editor_id=body.get("reviewer_id", "unknown"),
                at=utc_now_iso(),
                status=body.get("status"),
            )
        except ValueError as exc:
            return _error(422, str(exc))
        except SchemaError as exc:
            return _error(400, str(exc))
        try:
            new_record = state.store.put(
                "report", report_id, report_to_json(updated), expected_revision=record.revision
            )
        except StoreConflict as exc:
            return JSONResponse(status_code=409, content={"error": str(exc)})
        return JSONResponse(content=new_record.doc, headers={"ETag": str(new_record.revision)})

    # -- ratings and analytics ----------------------------------------------

    @app.post("/v1/ratings")
    async def post_ratings(request: Request):
        if (denied := _unauthorized(request)) is not None:
            return denied
        existing = {
            tuple(r.doc["key_tuple"]) for r in state.store.records("rating")
        }
        content_type = request.headers.get("content-type", "")
        try:
            if "csv" in content_type:
                text = (await request.body()).decode("utf-8")
                result = parse_ratings_csv(text, existing_keys=existing)
            else:
                docs = await request.json()
                if not isinstance(docs, list):
                    return _error(400, "JSON body must be a list of rating objects")
                result = ingest_ratings(docs, existing_keys=existing)
        except ValueError as exc:
            return _error(400, str(exc))
        for rating in result.accepted:
            state.store.upsert(
                "rating",
                "|".join(rating.key),
                {**rating.to_json(), "key_tuple": list(rating.key)},
            )
        return {
            "accepted": len(result.accepted),
            "rejected": [dict(r) for r in result.rejected],
        }

    @app.get("/v1/analytics/subgroups")
    async def analytics_subgroups(request: Request, group_by: str = Query(default="model,metric")):
        if (denied := _unauthorized(request)) is not None:
            return denied
        fields = tuple(f.strip() for f in group_by.split(",") if f.strip())
        for field in fields:
            if field not in GROUP_FIELDS:
                return _error(400, f"unknown group_by field {field!r}")
        ratings = []
        for record in state.store.records("rating"):
            doc = record.doc
            ratings.append(
                Rating(
                    rater_id=doc["rater_id"],
                    patient_id=doc["patient_id"],
                    model_alias=doc["model_alias"],
                    metric=MetricId(doc["metric"]),
                    score=doc["score"],
                )
            )
        subgroups: dict[str, SubgroupKey] = {}
        for record in state.store.records("patient"):
            doc = record.doc
            subgroups[doc["patient_id"]] = SubgroupKey(
                gender=Gender(doc["gender"]),
                age_group=AgeGroup(doc["age_group"]),
                arrhythmia_class=ArrhythmiaClass.from_label(doc["arrhythmia_class"]),
            )
        rows = aggregate(ratings, group_by=fields, subgroups=subgroups)
        return {"group_by": list(fields), "rows": [r.to_json() for r in rows]}

    # -- static images ------------------------------------------------------

    @app.get("/v1/images/{image_hash}")
    async def get_image(image_hash: str, request: Request):
        if (denied := _unauthorized(request)) is not None:
            return denied
        path = state.store.root / "images" / image_hash
        if not path.is_file():
            return _error(404, "unknown image")
        return Response(content=path.read_bytes(), media_type="image/png")

    return app
