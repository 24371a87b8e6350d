"""Workbench HTTP API over the store and engines.

REST over JSON; a thin orchestration layer that never re-implements pipeline
logic. Verification jobs run on a bounded in-process worker pool; the job
registry is the only cross-request mutable state.
"""
from __future__ import annotations

import itertools
import json
import re
import threading
import urllib.parse
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Mapping

from .backend import BackendDescriptor, HttpBackend
from .lexicon import load_lexicon, load_lexicon_dir
from .ngrams import cluster_by_ngram, ngram_counts
from .runner import run_verification
from .store import (
    DATASET_SCHEMA,
    RANKED_SCHEMA,
    PREDICTION_SCHEMA,
    RunLayout,
    load_manifest,
    read_records,
)
from .tasks import known_label_sets
from .template import (
    BindingError,
    Template,
    TemplateParseError,
    expansion_count,
    iter_expand,
    load_template,
    parse_template,
    save_template,
    template_to_json,
)

DEFAULT_LIMIT = 50
PREVIEW_SAMPLE_CAP = 50
JOB_STATES = ("queued", "running", "done", "failed")


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        self.status = status
        self.message = message
        super().__init__(message)


@dataclass
class VerificationJob:
    job_id: str
    template_name: str
    model_id: str
    state: str = "queued"
    completed: int = 0
    total: int = 0
    result_path: str | None = None
    error: str | None = None

    def to_obj(self) -> dict:
        obj = {
            "job_id": self.job_id,
            "template": self.template_name,
            "model_id": self.model_id,
            "state": self.state,
            "progress": {"completed": self.completed, "total": self.total},
        }
        if self.result_path is not None:
            obj["result_path"] = self.result_path
        if self.error is not None:
            obj["error"] = self.error
        return obj


class WorkbenchService:
    def __init__(
        self,
        root: str | Path,
        backends: Mapping[str, BackendDescriptor] | None = None,
        run_id: str = "default",
        host: str = "127.0.0.1",
        port: int = 0,
        max_jobs: int = 2,
        deterministic: bool = False,
    ):
        self.layout = RunLayout(root)
        if not self.layout.root.exists():
            raise RuntimeError(f"run directory {root} does not exist")
        self.layout.templates_dir.mkdir(parents=True, exist_ok=True)
        self.layout.lexicons_dir.mkdir(parents=True, exist_ok=True)
        self.run_id = run_id
        self.deterministic = deterministic
        self._backends = dict(backends or {})
        self._jobs: dict[str, VerificationJob] = {}
        self._job_counter = itertools.count(1)
        self._lock = threading.Lock()
        self._pool = ThreadPoolExecutor(max_workers=max(1, max_jobs))
        self._httpd = ThreadingHTTPServer((host, port), _make_handler(self))
        self._thread: threading.Thread | None = None

    # -- lifecycle ---------------------------------------------------------

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "WorkbenchService":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def shutdown(self) -> None:
        # Drain running verification jobs before stopping the listener.
        self._pool.shutdown(wait=True)
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=10)

    def __enter__(self) -> "WorkbenchService":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.shutdown()

    # -- template store ----------------------------------------------------

    def _template_path(self, name: str) -> Path:
        safe = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)
        return self.layout.templates_dir / f"{safe}.json"

    def list_templates(self) -> list[dict]:
        out = []
        for path in sorted(self.layout.templates_dir.glob("*.json")):
            out.append(template_to_json(load_template(path)))
        return out

    def get_template(self, name: str) -> Template:
        path = self._template_path(name)
        if not path.exists():
            raise ApiError(404, f"template {name!r} not found")
        return load_template(path)

    def put_template(self, obj: dict, create_only: bool = False) -> dict:
        try:
            template = parse_template(json.dumps(obj), known_label_sets())
        except (TemplateParseError, BindingError) as exc:
            raise ApiError(400, str(exc)) from exc
        path = self._template_path(template.name)
        if create_only and path.exists():
            raise ApiError(409, f"template {template.name!r} already exists")
        save_template(template, path)
        return template_to_json(template)

    def delete_template(self, name: str) -> None:
        path = self._template_path(name)
        if not path.exists():
            raise ApiError(404, f"template {name!r} not found")
        path.unlink()

    def preview(self, name: str, draft: dict | None) -> dict:
        if draft:
            try:
                template = parse_template(json.dumps(draft), known_label_sets())
            except (TemplateParseError, BindingError) as exc:
                raise ApiError(400, str(exc)) from exc
        else:
            template = self.get_template(name)
        lexicons = load_lexicon_dir(self.layout.lexicons_dir)
        try:
            count = expansion_count(template, lexicons)
            sample = list(itertools.islice(iter_expand(template, lexicons), PREVIEW_SAMPLE_CAP))
        except BindingError as exc:
            raise ApiError(400, str(exc)) from exc
        return {
            "count": count,
            "sample_cases": [
                {
                    "case_index": case.case_index,
                    "text": case.text,
                    "gold_label": case.gold_label,
                    "slot_values": dict(case.slot_values),
                }
                for case in sample
            ],
        }

    # -- lexicons ----------------------------------------------------------

    def list_lexicons(self) -> list[dict]:
        out = []
        for path in sorted(self.layout.lexicons_dir.glob("*.lex")):
            lexicon = load_lexicon(path)
            out.append({"name": lexicon.name, "size": len(lexicon)})
        return out

    def get_lexicon(self, name: str) -> dict:
        path = self.layout.lexicons_dir / f"{name}.lex"
        if not path.exists():
            raise ApiError(404, f"lexicon {name!r} not found")
        lexicon = load_lexicon(path)
        return {"name": lexicon.name, "entries": list(lexicon.entries)}

    # -- run artifacts -----------------------------------------------------

    def _ranked_records(self, run_id: str) -> list[dict]:
        path = self.layout.ranked_path(run_id)
        if not path.exists():
            raise ApiError(404, f"run {run_id!r} has no ranking")
        return list(read_records(path, RANKED_SCHEMA))

    def _dataset_texts(self, run_id: str) -> dict[str, str]:
        path = self.layout.dataset_path(run_id)
        if not path.exists():
            return {}
        return {r["id"]: r["text"] for r in read_records(path, DATASET_SCHEMA)}

    def _prediction_probs(self, run_id: str) -> tuple[dict, dict]:
        """Task and reference probability maps, located via the rank manifest."""
        manifest_path = self.layout.stage_dir(run_id, "rank") / "manifest.json"
        if not manifest_path.exists():
            return {}, {}
        config = load_manifest(manifest_path).config
        out = []
        for key in ("task_model_id", "ref_model_id"):
            model_id = config.get(key)
            probs: dict[str, dict] = {}
            if model_id:
                path = self.layout.predictions_path(run_id, model_id)
                if path.exists():
                    probs = {
                        r["example_id"]: r["probs"]
                        for r in read_records(path, PREDICTION_SCHEMA)
                    }
            out.append(probs)
        return out[0], out[1]

    def hard_examples(self, run_id: str, offset: int, limit: int) -> list[dict]:
        ranked = self._ranked_records(run_id)
        texts = self._dataset_texts(run_id)
        task_probs, ref_probs = self._prediction_probs(run_id)
        items = []
        for record in ranked[offset : offset + limit]:
            example_id = record["example_id"]
            item = {
                "example_id": example_id,
                "rank": record["rank"],
                "score": record["score"],
                "argmax_label": record["argmax_label"],
                "text": texts.get(example_id, ""),
            }
            if example_id in task_probs:
                item["task_probs"] = task_probs[example_id]
            if example_id in ref_probs:
                item["ref_probs"] = ref_probs[example_id]
            items.append(item)
        return items

    def _hard_texts(self, run_id: str) -> dict[str, str]:
        ranked_ids = [r["example_id"] for r in self._ranked_records(run_id)]
        texts = self._dataset_texts(run_id)
        return {example_id: texts[example_id] for example_id in ranked_ids if example_id in texts}

    def ngram_stats(self, run_id: str, n_min: int, n_max: int, min_count: int) -> list[dict]:
        stats = ngram_counts(self._hard_texts(run_id), n_min, n_max, min_count)
        return [stat.to_record() for stat in stats]

    def ngram_cluster(self, run_id: str, ngram: list[str]) -> dict:
        ids = cluster_by_ngram(self._hard_texts(run_id), ngram)
        return {"ngram": ngram, "example_ids": ids}

    def list_results(self, template: str | None, model: str | None) -> list[dict]:
        verify_dir = self.layout.stage_dir(self.run_id, "verify")
        out = []
        if verify_dir.exists():
            for path in sorted(verify_dir.glob("*.json")):
                record = json.loads(path.read_text(encoding="utf-8"))
                if template and record.get("template") != template:
                    continue
                if model and record.get("model_id") != model:
                    continue
                out.append(record)
        out.sort(key=lambda r: (r.get("template", ""), r.get("model_id", "")))
        return out

    # -- verification jobs ---------------------------------------------------

    def submit_verification(self, template_name: str, model_id: str) -> VerificationJob:
        template = self.get_template(template_name)
        descriptor = self._backends.get(model_id)
        if descriptor is None:
            raise ApiError(400, f"no backend configured for model {model_id!r}")
        with self._lock:
            job = VerificationJob(
                job_id=f"job-{next(self._job_counter):04d}",
                template_name=template_name,
                model_id=model_id,
            )
            self._jobs[job.job_id] = job
        self._pool.submit(self._run_job, job, template, descriptor)
        return job

    def get_job(self, job_id: str) -> VerificationJob:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise ApiError(404, f"job {job_id!r} not found")
        return job

    def _run_job(self, job: VerificationJob, template: Template, descriptor: BackendDescriptor) -> None:
        with self._lock:
            job.state = "running"

        def on_progress(done: int, total: int) -> None:
            with self._lock:
                job.completed = done
                job.total = total

        try:
            backend = HttpBackend(descriptor)
            result, path = run_verification(
                self.layout,
                self.run_id,
                template,
                backend,
                deterministic=self.deterministic,
                on_progress=on_progress,
            )
        except Exception as exc:
            with self._lock:
                job.state = "failed"
                job.error = str(exc)
            return
        with self._lock:
            job.state = "done"
            job.result_path = str(path)


# -- HTTP plumbing -----------------------------------------------------------

_ROUTES = [
    ("GET", re.compile(r"/api/templates/?$"), "templates_list"),
    ("POST", re.compile(r"/api/templates/?$"), "templates_create"),
    ("GET", re.compile(r"/api/templates/(?P<name>[^/]+)$"), "templates_get"),
    ("PUT", re.compile(r"/api/templates/(?P<name>[^/]+)$"), "templates_put"),
    ("DELETE", re.compile(r"/api/templates/(?P<name>[^/]+)$"), "templates_delete"),
    ("POST", re.compile(r"/api/templates/(?P<name>[^/]+)/preview$"), "templates_preview"),
    ("GET", re.compile(r"/api/lexicons/?$"), "lexicons_list"),
    ("GET", re.compile(r"/api/lexicons/(?P<name>[^/]+)$"), "lexicons_get"),
    ("GET", re.compile(r"/api/hard-examples$"), "hard_examples"),
    ("GET", re.compile(r"/api/ngrams$"), "ngrams"),
    ("GET", re.compile(r"/api/ngrams/cluster$"), "ngram_cluster"),
    ("POST", re.compile(r"/api/verify$"), "verify"),
    ("GET", re.compile(r"/api/jobs/(?P<job_id>[^/]+)$"), "job_get"),
    ("GET", re.compile(r"/api/results$"), "results"),
]


def _paginate(items: list, params: dict) -> list:
    offset = int(params.get("offset", ["0"])[0])
    limit = int(params.get("limit", [str(DEFAULT_LIMIT)])[0])
    return items[offset : offset + limit]


def _make_handler(service: WorkbenchService):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, *args):
            pass

        def _send(self, status: int, obj) -> None:
            data = b"" if status == 204 else json.dumps(obj, ensure_ascii=False).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(data)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            if data and self.command != "HEAD":
                self.wfile.write(data)

        def _body(self) -> dict:
            length = int(self.headers.get("Content-Length", "0"))
            if length == 0:
                return {}
            try:
                return json.loads(self.rfile.read(length))
            except json.JSONDecodeError as exc:
                raise ApiError(400, f"request body is not valid JSON: {exc}") from exc

        def _dispatch(self) -> None:
            parsed = urllib.parse.urlsplit(self.path)
            params = urllib.parse.parse_qs(parsed.query)
            for method, pattern, endpoint in _ROUTES:
                if method != self.command:
                    continue
                match = pattern.match(parsed.path)
                if match:
                    try:
                        getattr(self, "ep_" + endpoint)(params, **match.groupdict())
                    except ApiError as exc:
                        self._send(exc.status, {"error": exc.message})
                    except Exception as exc:  # surface, don't kill the thread
                        self._send(500, {"error": str(exc)})
                    return
            self._send(404, {"error": f"no route for {self.command} {parsed.path}"})

        do_GET = do_POST = do_PUT = do_DELETE = _dispatch

        # -- endpoints --

        def ep_templates_list(self, params):
            self._send(200, _paginate(service.list_templates(), params))

        def ep_templates_create(self, params):
            self._send(201, service.put_template(self._body(), create_only=True))

        def ep_templates_get(self, params, name):
            self._send(200, template_to_json(service.get_template(name)))

        def ep_templates_put(self, params, name):
            obj = self._body()
            if obj.get("name") not in (None, name):
                raise ApiError(400, "template name in body does not match URL")
            obj["name"] = name
            self._send(200, service.put_template(obj))

        def ep_templates_delete(self, params, name):
            service.delete_template(name)
            self._send(204, None)

        def ep_templates_preview(self, params, name):
            self._send(200, service.preview(name, self._body() or None))

        def ep_lexicons_list(self, params):
            self._send(200, _paginate(service.list_lexicons(), params))

        def ep_lexicons_get(self, params, name):
            self._send(200, service.get_lexicon(name))

        def ep_hard_examples(self, params):
            run_id = params.get("run", [service.run_id])[0]
            offset = int(params.get("offset", ["0"])[0])
            limit = int(params.get("limit", [str(DEFAULT_LIMIT)])[0])
            self._send(200, service.hard_examples(run_id, offset, limit))

        def ep_ngrams(self, params):
            run_id = params.get("run", [service.run_id])[0]
            n_min = int(params.get("n_min", ["2"])[0])
            n_max = int(params.get("n_max", ["5"])[0])
            min_count = int(params.get("min_count", ["3"])[0])
            self._send(200, _paginate(service.ngram_stats(run_id, n_min, n_max, min_count), params))

        def ep_ngram_cluster(self, params):
            run_id = params.get("run", [service.run_id])[0]
            raw = params.get("ngram", [""])[0]
            tokens = [tok for tok in raw.split(" ") if tok]
            if not tokens:
                raise ApiError(400, "ngram query parameter is required")
            self._send(200, service.ngram_cluster(run_id, tokens))

        def ep_verify(self, params):
            body = self._body()
            template_name = body.get("template")
            model_id = body.get("model_id")
            if not template_name or not model_id:
                raise ApiError(400, "body must carry template and model_id")
            job = service.submit_verification(template_name, model_id)
            self._send(202, {"job_id": job.job_id})

        def ep_job_get(self, params, job_id):
            self._send(200, service.get_job(job_id).to_obj())

        def ep_results(self, params):
            template = params.get("template", [None])[0]
            model = params.get("model", [None])[0]
            self._send(200, _paginate(service.list_results(template, model), params))

    return Handler
