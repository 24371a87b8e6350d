"""Shared verification entry point used by both the CLI and the service.

Keeping a single code path is what makes CLI and service outputs
bit-identical for the same template, backend and seed.
"""
from __future__ import annotations

import json
import time
from pathlib import Path
from typing import Callable

from .lexicon import load_lexicon_dir
from .store import RunLayout, make_manifest, write_manifest
from .tasks import TaskSpec, load_task_spec
from .template import Template, expand
from .verify import TemplateResult, evaluate_template, result_to_record


def run_verification(
    layout: RunLayout,
    run_id: str,
    template: Template,
    backend,
    spec: TaskSpec | None = None,
    deterministic: bool = False,
    max_workers: int = 4,
    on_progress: Callable[[int, int], None] | None = None,
) -> tuple[TemplateResult, Path]:
    """Expand a template, evaluate it against a backend, persist the result JSON."""
    started = time.time()
    if spec is None:
        spec = load_task_spec(template.task)
    lexicons = load_lexicon_dir(layout.lexicons_dir)
    cases = expand(template, lexicons)
    result = evaluate_template(
        cases,
        backend,
        spec,
        test_type=template.test_type,
        max_workers=max_workers,
        on_progress=on_progress,
    )
    out_path = layout.result_path(run_id, template.name, backend.model_id)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(result_to_record(result), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    out_path.write_text(payload, encoding="utf-8", newline="\n")
    manifest = make_manifest(
        run_id=run_id,
        stage="verify",
        config={
            "template": template.name,
            "model_id": backend.model_id,
            "task": template.task,
            "n_cases": result.n_cases,
        },
        inputs={},
        outputs={out_path.name: out_path},
        counts={"cases": result.n_cases, "correct": result.n_correct},
        started=started,
        deterministic=deterministic,
    )
    manifest_dir = out_path.parent / f"{out_path.stem}.manifest"
    write_manifest(manifest_dir, manifest)
    return result, out_path
