"""HTTP job service for the authoring UI.

Endpoints (JSON, images base64-encoded PNG):
  POST /jobs                 -> 202 {"id": ...}; identical payloads share a job
  GET  /jobs/{id}            -> job record
  GET  /jobs/{id}/result.gif -> animated GIF
  GET  /jobs/{id}/frames/{k}.png
  POST /suggest-directions   -> {"directions": [{"x","y","votes"}, ...]}
  GET  /healthz              -> {"status": "ok"}

Jobs run on a bounded worker pool; records move queued -> running ->
done | failed under a single lock.
"""

from __future__ import annotations

import base64
import json
import os
import re
import tempfile
import threading
import traceback
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .pipeline import ProjectConfig, StageError, run_pipeline, suggest


@dataclass
class JobRecord:
    id: str
    state: str = "queued"  # queued -> running -> done | failed
    config_hash: str = ""
    timings: dict = field(default_factory=dict)
    result_dir: str | None = None
    gif_path: str | None = None
    frame_count: int = 0
    diagnostics: dict = field(default_factory=dict)
    error: str | None = None


class JobManager:
    def __init__(self, work_dir: str, max_workers: int = 2):
        self.work_dir = work_dir
        self.lock = threading.Lock()
        self.jobs: dict[str, JobRecord] = {}
        self.by_hash: dict[str, str] = {}
        self.pool = ThreadPoolExecutor(max_workers=max_workers)

    def submit(self, payload: dict) -> JobRecord:
        job_dir = None
        config, config_hash, job_dir = self._prepare(payload)
        with self.lock:
            existing = self.by_hash.get(config_hash)
            if existing is not None:
                return self.jobs[existing]
            job = JobRecord(id=uuid.uuid4().hex[:12], config_hash=config_hash)
            job.result_dir = os.path.join(job_dir, "frames")
            job.gif_path = os.path.join(job_dir, "loop.gif")
            self.jobs[job.id] = job
            self.by_hash[config_hash] = job.id
        config.out_dir = job.result_dir
        config.gif_path = job.gif_path
        self.pool.submit(self._run, job.id, config)
        return job

    def _prepare(self, payload: dict):
        if "image" not in payload or "mask" not in payload:
            raise ValueError("payload needs base64 'image' and 'mask' fields")
        job_dir = tempfile.mkdtemp(prefix="job_", dir=self.work_dir)
        image_bytes = base64.b64decode(payload["image"])
        mask_bytes = base64.b64decode(payload["mask"])
        image_path = os.path.join(job_dir, "image.png")
        mask_path = os.path.join(job_dir, "mask.png")
        with open(image_path, "wb") as f:
            f.write(image_bytes)
        with open(mask_path, "wb") as f:
            f.write(mask_bytes)
        opts = payload.get("options", {}) or {}
        allowed = {
            "direction_deg", "auto_direction", "soft_boundary", "frame_count", "fps",
            "working_long_side", "solver_mode", "max_angle_deg", "pairwise_weight",
            "crf_iterations", "attenuation_spacing", "label_cap",
        }
        kwargs = {k: v for k, v in opts.items() if k in allowed}
        config = ProjectConfig(
            image_path=image_path,
            mask_path=mask_path,
            strokes=payload.get("strokes"),
            **kwargs,
        )
        config_hash = config.config_hash(image_bytes=image_bytes, mask_bytes=mask_bytes)
        return config, config_hash, job_dir

    def _run(self, job_id: str, config: ProjectConfig) -> None:
        with self.lock:
            job = self.jobs[job_id]
            job.state = "running"
        try:
            seq, diag = run_pipeline(config)
            with self.lock:
                job.state = "done"
                job.timings = diag["timings"]
                job.frame_count = len(seq)
                job.diagnostics = {
                    "warnings": diag.get("warnings", []),
                    "cells": diag.get("cells", []),
                    "field_stats": diag.get("field_stats", {}),
                }
        except StageError as exc:
            with self.lock:
                job.state = "failed"
                job.error = str(exc)
                job.diagnostics = {"stage": exc.stage, "message": exc.message}
        except Exception as exc:  # pragma: no cover - defensive
            with self.lock:
                job.state = "failed"
                job.error = f"[internal] {exc}"
                job.diagnostics = {"stage": "internal", "message": traceback.format_exc()}

    def get(self, job_id: str) -> JobRecord | None:
        with self.lock:
            return self.jobs.get(job_id)


def make_handler(manager: JobManager, static_dir: str | None):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):  # keep test output clean
            pass

        def _send_json(self, obj, status=200):
            blob = json.dumps(obj).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(blob)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(blob)

        def _send_file(self, path, ctype):
            if not path or not os.path.isfile(path):
                self._send_json({"error": "not_found"}, 404)
                return
            with open(path, "rb") as f:
                blob = f.read()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(blob)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(blob)

        def _read_body(self):
            length = int(self.headers.get("Content-Length", 0))
            return self.rfile.read(length)

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.end_headers()

        def do_POST(self):
            try:
                payload = json.loads(self._read_body() or b"{}")
            except json.JSONDecodeError:
                self._send_json({"error": "bad_json"}, 400)
                return
            if self.path == "/jobs":
                try:
                    job = manager.submit(payload)
                except (ValueError, KeyError, OSError) as exc:
                    self._send_json({"error": "bad_request", "detail": str(exc)}, 400)
                    return
                self._send_json({"id": job.id}, 202)
            elif self.path == "/suggest-directions":
                if "image" not in payload:
                    self._send_json({"error": "bad_request", "detail": "missing image"}, 400)
                    return
                with tempfile.NamedTemporaryFile(suffix=".png", delete=False) as f:
                    f.write(base64.b64decode(payload["image"]))
                    tmp = f.name
                try:
                    winners = suggest(tmp)
                finally:
                    os.unlink(tmp)
                self._send_json(
                    {"directions": [{"x": x, "y": y, "votes": v} for x, y, v in winners]}
                )
            else:
                self._send_json({"error": "not_found"}, 404)

        def do_GET(self):
            if self.path == "/healthz":
                self._send_json({"status": "ok"})
                return
            m = re.fullmatch(r"/jobs/([0-9a-f]+)", self.path)
            if m:
                job = manager.get(m.group(1))
                if job is None:
                    self._send_json({"error": "not_found"}, 404)
                else:
                    self._send_json(asdict(job))
                return
            m = re.fullmatch(r"/jobs/([0-9a-f]+)/result\.gif", self.path)
            if m:
                job = manager.get(m.group(1))
                self._send_file(job.gif_path if job and job.state == "done" else None, "image/gif")
                return
            m = re.fullmatch(r"/jobs/([0-9a-f]+)/frames/(\d+)\.png", self.path)
            if m:
                job = manager.get(m.group(1))
                path = None
                if job and job.state == "done" and job.result_dir:
                    path = os.path.join(job.result_dir, f"frame_{int(m.group(2)):04d}.png")
                self._send_file(path, "image/png")
                return
            if static_dir:
                rel = "index.html" if self.path in ("/", "") else self.path.lstrip("/")
                candidate = os.path.normpath(os.path.join(static_dir, rel))
                if candidate.startswith(os.path.abspath(static_dir)) and os.path.isfile(candidate):
                    ctype = {
                        ".html": "text/html",
                        ".js": "application/javascript",
                        ".css": "text/css",
                    }.get(os.path.splitext(candidate)[1], "application/octet-stream")
                    self._send_file(candidate, ctype)
                    return
            self._send_json({"error": "not_found"}, 404)

    return Handler


def serve(bind: str = "127.0.0.1:8080", work_dir: str | None = None,
          max_workers: int = 2, static_dir: str | None = None) -> ThreadingHTTPServer:
    """Create the server (caller decides whether to block on serve_forever)."""
    host, _, port = bind.partition(":")
    work_dir = work_dir or tempfile.mkdtemp(prefix="endless_loop_")
    os.makedirs(work_dir, exist_ok=True)
    manager = JobManager(work_dir, max_workers=max_workers)
    if static_dir:
        static_dir = os.path.abspath(static_dir)
    server = ThreadingHTTPServer((host, int(port or 8080)), make_handler(manager, static_dir))
    server.manager = manager  # exposed for tests
    return server
