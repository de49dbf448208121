#!/usr/bin/env python3
"""End-to-end drive of the engine through its external interfaces.

Stands up a stub chat-completions HTTP server (the real wire format), runs the
CLI against it, then exercises the live service: submit, poll, fetch JSON and
HTML reports, review with optimistic concurrency, ratings, analytics, images.

Exits 0 when every step behaves; prints one line per step.
"""
from __future__ import annotations

import json
import signal
import socket
import subprocess
import sys
import tempfile
import threading
import time
from http.server import BaseHTTPRequestHandler, HTTPServer
from pathlib import Path

import httpx

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

import helpers  # noqa: E402
from cardioscribe.domain.bundle_io import serialize_bundle  # noqa: E402
from cardioscribe.prompting.demos import bank_to_json  # noqa: E402
from cardioscribe.factcheck import guidelines_to_json  # noqa: E402
from cardioscribe.util import canonical_json  # noqa: E402

OK = "✓"


def step(name: str) -> None:
    print(f"{OK} {name}", flush=True)


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class StubModel(BaseHTTPRequestHandler):
    """Real chat-completions wire shape; routes on the request content."""

    def do_POST(self):  # noqa: N802
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        text = json.dumps(body["messages"])
        if "image_url" in text:
            completion = helpers.T2F_COMPLETION
        elif "Clinical findings:" in text:
            completion = helpers.F2I_COMPLETION
        else:
            completion = helpers.M2F_COMPLETION
        payload = json.dumps({"choices": [{"message": {"content": completion}}]})
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(payload.encode())

    def log_message(self, *args):
        pass


def write_http_fixtures(directory: Path, endpoint: str) -> tuple[Path, Path]:
    directory.mkdir(parents=True, exist_ok=True)
    bundle = helpers.golden_bundle()
    config = helpers.scripted_config(bundle)  # reuse bank/guidelines; swap backends below

    bundle_path = directory / "bundle.json"
    # path-based tracing images exercise image resolution on the http path
    for i, name in enumerate(["strip-a.png", "strip-b.png"]):
        (directory / name).write_bytes(b"\x89PNG\r\n\x1a\n" + bytes([i]) * 32)
    doc = json.loads(serialize_bundle(bundle))
    doc["tracings"][0]["image_ref"] = "strip-a.png"
    doc["tracings"][1]["image_ref"] = "strip-b.png"
    bundle_path.write_text(canonical_json(doc), encoding="utf-8")

    (directory / "bank.json").write_text(canonical_json(bank_to_json(config.demo_bank)))
    (directory / "guidelines.json").write_text(canonical_json(guidelines_to_json(config.guidelines)))
    agents = {}
    for role in ("M2F", "T2F", "F2I"):
        agents[role] = {
            "backend": {"kind": "http", "endpoint_url": endpoint, "timeout_ms": 5000, "max_retries": 1},
            "model_name": f"stub-{role.lower()}",
            "params": {"temperature": 0.0, "max_tokens": 1024, "seed": 7},
            "vision": role == "T2F",
        }
    config_path = directory / "config.json"
    config_path.write_text(
        canonical_json(
            {
                "schema_version": "pipelineconfig/v1",
                "agents": agents,
                "demo_bank": "bank.json",
                "guidelines": "guidelines.json",
                "max_factcheck_retries": 2,
                "demo_seed": 7,
                "created_at_override": helpers.FIXED_TIME,
            }
        )
    )
    return bundle_path, config_path


def main() -> int:
    with tempfile.TemporaryDirectory() as td:
        work = Path(td)

        model_server = HTTPServer(("127.0.0.1", 0), StubModel)
        threading.Thread(target=model_server.serve_forever, daemon=True).start()
        endpoint = f"http://127.0.0.1:{model_server.server_port}/v1/chat/completions"
        step(f"stub chat-completions server up at {endpoint}")

        bundle_path, config_path = write_http_fixtures(work / "fx", endpoint)

        # --- CLI against the live HTTP backend -----------------------------
        run = subprocess.run(
            [sys.executable, "-m", "cardioscribe.cli", "run", str(bundle_path),
             "--config", str(config_path)],
            capture_output=True,
        )
        assert run.returncode == 0, run.stderr.decode()
        report = json.loads(run.stdout)
        assert report["meta"]["state"] == "Complete"
        assert len(report["findings"]) == 5 and len(report["interpretation"]) == 3
        step("CLI run over the http backend: Complete report, 5 findings, 3 interpretation items")

        report_path = work / "report.json"
        report_path.write_bytes(run.stdout)
        fc = subprocess.run(
            [sys.executable, "-m", "cardioscribe.cli", "factcheck", str(report_path)],
            capture_output=True,
        )
        assert fc.returncode == 0 and json.loads(fc.stdout) == []
        step("CLI factcheck on the produced report: clean")

        # --- live service ----------------------------------------------------
        port = free_port()
        service = subprocess.Popen(
            [sys.executable, "-m", "cardioscribe.cli", "serve", "--port", str(port),
             "--store", str(work / "store"), "--config", str(config_path)],
            stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL,
        )
        base = f"http://127.0.0.1:{port}"
        try:
            deadline = time.time() + 15
            while time.time() < deadline:
                try:
                    httpx.get(f"{base}/v1/jobs/warmup", timeout=1.0)
                    break
                except httpx.HTTPError:
                    time.sleep(0.05)
            step("service up")

            bundle_doc = json.loads(bundle_path.read_text())
            # hash refs so the bundle is portable into the store; seed the bytes
            images_dir = work / "store" / "images"
            images_dir.mkdir(parents=True, exist_ok=True)
            for ref, name in ((helpers.IMG_A, "strip-a.png"), (helpers.IMG_B, "strip-b.png")):
                (images_dir / ref.removeprefix("sha256:")).write_bytes(
                    (work / "fx" / name).read_bytes()
                )
            bundle_doc["tracings"][0]["image_ref"] = helpers.IMG_A
            bundle_doc["tracings"][1]["image_ref"] = helpers.IMG_B
            job_id = httpx.post(f"{base}/v1/jobs", json=bundle_doc).json()["job_id"]
            poll_deadline = time.time() + 20
            while time.time() < poll_deadline:
                job = httpx.get(f"{base}/v1/jobs/{job_id}").json()
                if job["state"]["name"] in ("Complete", "NeedsManualReview", "Failed"):
                    break
                time.sleep(0.05)
            assert job["state"]["name"] == "Complete", job
            step(f"job {job_id} submitted and completed over the http backend")

            got = httpx.get(f"{base}/v1/reports/{job_id}")
            revision = int(got.headers["ETag"])
            report_doc = got.json()
            assert report_doc["meta"]["state"] == "Complete"
            html = httpx.get(f"{base}/v1/reports/{job_id}", headers={"Accept": "text/html"})
            assert '<section id="findings">' in html.text
            step("report fetched as JSON and HTML")

            target = report_doc["interpretation"][0]["statement"]
            review = httpx.post(
                f"{base}/v1/reports/{job_id}/review",
                json={"revision": revision, "reviewer_id": "dr-e2e", "status": "reviewed",
                      "edits": [{"target_kind": "interpretation", "target_index": 0,
                                  "old_text": target, "new_text": "Edited by e2e."}]},
            )
            assert review.status_code == 200, review.text
            stale = httpx.post(
                f"{base}/v1/reports/{job_id}/review",
                json={"revision": revision, "reviewer_id": "dr-e2e", "edits": []},
            )
            assert stale.status_code == 409
            step("review edit applied; stale revision rejected with 409")

            ratings = [
                {"rater_id": "dr-e2e", "patient_id": "P-0001", "model_alias": "Model A",
                 "metric": m, "score": 5}
                for m in ("ACC", "CPL", "ORG", "CPH", "SCI", "CNS", "FFH", "FFB")
            ]
            accepted = httpx.post(f"{base}/v1/ratings", json=ratings).json()["accepted"]
            assert accepted == 8
            table = httpx.get(f"{base}/v1/analytics/subgroups",
                              params={"group_by": "model,metric"}).json()
            assert len(table["rows"]) == 8
            assert all(row["formatted"] == "5.0 (±0.0)" for row in table["rows"])
            step("ratings ingested; analytics table aggregates 8 metric rows")

            image = httpx.get(f"{base}/v1/images/{'a' * 64}")
            assert image.status_code == 200
            assert image.content == (work / "fx" / "strip-a.png").read_bytes()
            step("tracing image served from the hash route")
        finally:
            service.send_signal(signal.SIGTERM)
            try:
                service.wait(timeout=5)
            except subprocess.TimeoutExpired:
                service.kill()
            model_server.shutdown()

    print("E2E DRIVE: ALL STEPS PASSED", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
