"""Stage 1: drive query-seeded continuations through a backend, keep first sentences.

The continuation prompt is the query words joined by single spaces with no
instruction wrapper; the query is kept as the sentence head, so segmentation
runs over prompt + continuation. Examples are written incrementally and the
run is resumable: completed example ids (= query ids) are skipped on rerun.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .backend import BackendError, GenerationConfig, TransportError
from .queries import Query
from .segment import extract_first_sentence
from .store import DATASET_SCHEMA, append_records, read_records

MAX_FAILURE_RATE = 0.1
WRITE_BATCH = 32


class GenerationAborted(RuntimeError):
    """Raised when the backend failure rate crosses the abort threshold."""

    def __init__(self, report: "GenerationReport"):
        self.report = report
        super().__init__(
            f"aborted after {len(report.errors)} backend failures "
            f"({report.written} examples written)"
        )


@dataclass(frozen=True)
class SynthExample:
    id: str
    query: Query
    raw_continuation: str
    text: str
    backend_model_id: str
    created_at: float

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "query": list(self.query.words),
            "text": self.text,
            "raw": self.raw_continuation,
            "model_id": self.backend_model_id,
        }


@dataclass
class GenerationReport:
    total: int = 0
    written: int = 0
    skipped: int = 0
    dropped: int = 0
    errors: list[tuple[str, str]] = field(default_factory=list)

    def counts(self) -> dict:
        return {
            "queries": self.total,
            "written": self.written,
            "skipped": self.skipped,
            "dropped": self.dropped,
            "errors": len(self.errors),
        }


def continuation_prompt(query: Query) -> str:
    return " ".join(query.words)


def generate_example(
    query: Query, backend, config: GenerationConfig, deterministic: bool = False
) -> SynthExample | None:
    """One query -> one example, or None when post-processing leaves no text."""
    prompt = continuation_prompt(query)
    raw = backend.complete(prompt, config)
    sentence = extract_first_sentence(prompt + raw).strip()
    if not sentence:
        return None
    return SynthExample(
        id=query.id,
        query=query,
        raw_continuation=raw,
        text=sentence,
        backend_model_id=backend.model_id,
        created_at=0.0 if deterministic else time.time(),
    )


def build_synthtest(
    queries: Sequence[Query],
    backend,
    config: GenerationConfig,
    out_path: str | Path,
    max_workers: int = 4,
    deterministic: bool = False,
    max_failure_rate: float = MAX_FAILURE_RATE,
) -> GenerationReport:
    """Generate the synthetic test set to a JSONL file, resumably.

    Per-query backend errors are recorded and the run continues; once failures
    exceed max_failure_rate of the query count the run aborts, keeping what
    was written so far.
    """
    out_path = Path(out_path)
    report = GenerationReport(total=len(queries))
    done_ids: set[str] = set()
    if out_path.exists():
        done_ids = {record["id"] for record in read_records(out_path, DATASET_SCHEMA)}
    pending = [q for q in queries if q.id not in done_ids]
    report.skipped = len(queries) - len(pending)
    allowed_failures = max_failure_rate * len(queries)

    def one(query: Query):
        try:
            return generate_example(query, backend, config, deterministic)
        except (BackendError, TransportError) as exc:
            return (query.id, str(exc))

    batch: list[dict] = []
    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        for outcome in pool.map(one, pending):
            if isinstance(outcome, tuple):
                report.errors.append(outcome)
                if len(report.errors) > allowed_failures:
                    append_records(out_path, batch, DATASET_SCHEMA)
                    raise GenerationAborted(report)
                continue
            if outcome is None:
                report.dropped += 1
                continue
            batch.append(outcome.to_record())
            report.written += 1
            if len(batch) >= WRITE_BATCH:
                append_records(out_path, batch, DATASET_SCHEMA)
                batch = []
    if batch or not out_path.exists():
        append_records(out_path, batch, DATASET_SCHEMA)
    return report
