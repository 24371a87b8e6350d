"""File-based persistence: JSONL datasets, run manifests, and the run layout.

Layout under a workspace root:

    runs/<run_id>/<stage>/...   stage artifacts plus manifest.json
    templates/<name>.json       template store
    lexicons/<NAME>.lex         lexicon store

Writers append whole batches; a sidecar `<file>.offset` records the committed
byte length so a crash mid-batch is recoverable by truncating back to it.
Line endings are LF everywhere so content digests are platform-stable.
"""
from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping


class StoreError(RuntimeError):
    pass


class SchemaError(StoreError):
    pass


@dataclass(frozen=True)
class RecordSchema:
    """Field name -> required type(s) for one JSONL record shape."""

    name: str
    fields: Mapping[str, tuple[type, ...]]

    def validate(self, record: Mapping, where: str) -> None:
        if not isinstance(record, Mapping):
            raise SchemaError(f"{where}: record is not an object")
        for fieldname, types in self.fields.items():
            if fieldname not in record:
                raise SchemaError(f"{where}: missing field {fieldname!r} ({self.name})")
            if not isinstance(record[fieldname], types):
                raise SchemaError(
                    f"{where}: field {fieldname!r} has type "
                    f"{type(record[fieldname]).__name__}, expected {self.name} schema"
                )


QUERY_SCHEMA = RecordSchema("query", {"id": (str,), "words": (list,), "source_line": (int,)})
DATASET_SCHEMA = RecordSchema(
    "synth-example",
    {"id": (str,), "query": (list,), "text": (str,), "raw": (str,), "model_id": (str,)},
)
PREDICTION_SCHEMA = RecordSchema(
    "prediction", {"example_id": (str,), "model_id": (str,), "probs": (dict,)}
)
RANKED_SCHEMA = RecordSchema(
    "divergence",
    {"example_id": (str,), "score": (int, float), "argmax_label": (str,), "rank": (int,)},
)


def _offset_path(path: Path) -> Path:
    return path.with_name(path.name + ".offset")


def _read_offset(path: Path) -> int | None:
    offset_file = _offset_path(path)
    if not offset_file.exists():
        return None
    try:
        return int(offset_file.read_text(encoding="utf-8").strip())
    except ValueError as exc:
        raise StoreError(f"{offset_file}: corrupt offset sidecar") from exc


def _write_offset(path: Path, offset: int) -> None:
    offset_file = _offset_path(path)
    tmp = offset_file.with_name(offset_file.name + ".tmp")
    tmp.write_text(str(offset), encoding="utf-8")
    os.replace(tmp, offset_file)


def append_records(
    path: str | Path, records: Iterable[Mapping], schema: RecordSchema | None = None
) -> int:
    """Append one JSON line per record; commit the batch via the offset sidecar.

    If the file is longer than the committed offset (a previous batch was
    interrupted), the partial tail is truncated before appending.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines: list[bytes] = []
    for index, record in enumerate(records):
        if schema is not None:
            schema.validate(record, f"record {index}")
        lines.append(json.dumps(record, ensure_ascii=False, sort_keys=True).encode("utf-8") + b"\n")
    committed = _read_offset(path)
    with open(path, "ab") as handle:
        size = handle.tell()
        if committed is None:
            committed = size
        if size > committed:
            handle.truncate(committed)
            handle.seek(committed)
        for line in lines:
            handle.write(line)
        handle.flush()
        os.fsync(handle.fileno())
        new_offset = handle.tell()
    _write_offset(path, new_offset)
    return len(lines)


def read_records(path: str | Path, schema: RecordSchema | None = None) -> Iterator[dict]:
    """Stream records from a JSONL file; constant memory in the file size."""
    path = Path(path)
    if not path.exists():
        raise StoreError(f"{path}: no such file")
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.rstrip("\n")
            try:
                record = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise StoreError(f"{path}: line {lineno}: malformed JSON ({exc.msg})") from exc
            if schema is not None:
                schema.validate(record, f"{path}: line {lineno}")
            yield record


def sha256_digest(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return "sha256:" + digest.hexdigest()


@dataclass
class RunManifest:
    run_id: str
    stage: str
    config: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    started: float = 0.0
    finished: float = 0.0

    def to_obj(self) -> dict:
        return {
            "run_id": self.run_id,
            "stage": self.stage,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "counts": self.counts,
            "started": self.started,
            "finished": self.finished,
        }


def write_manifest(directory: str | Path, manifest: RunManifest) -> Path:
    path = Path(directory) / "manifest.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(manifest.to_obj(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    path.write_text(payload, encoding="utf-8", newline="\n")
    return path


def load_manifest(path: str | Path) -> RunManifest:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return RunManifest(**obj)


class RunLayout:
    """Path conventions for one workspace root."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    @property
    def templates_dir(self) -> Path:
        return self.root / "templates"

    @property
    def lexicons_dir(self) -> Path:
        return self.root / "lexicons"

    def run_dir(self, run_id: str) -> Path:
        return self.root / "runs" / run_id

    def stage_dir(self, run_id: str, stage: str) -> Path:
        return self.run_dir(run_id) / stage

    def queries_path(self, run_id: str) -> Path:
        return self.stage_dir(run_id, "sample-queries") / "queries.jsonl"

    def dataset_path(self, run_id: str) -> Path:
        return self.stage_dir(run_id, "generate") / "dataset.jsonl"

    def predictions_path(self, run_id: str, model_id: str) -> Path:
        return self.stage_dir(run_id, "predict") / f"predictions-{_slug(model_id)}.jsonl"

    def ranked_path(self, run_id: str) -> Path:
        return self.stage_dir(run_id, "rank") / "ranked.jsonl"

    def ngrams_path(self, run_id: str) -> Path:
        return self.stage_dir(run_id, "analyze") / "ngrams.json"

    def result_path(self, run_id: str, template_name: str, model_id: str) -> Path:
        return self.stage_dir(run_id, "verify") / f"{_slug(template_name)}--{_slug(model_id)}.json"

    def list_run_ids(self) -> list[str]:
        runs_root = self.root / "runs"
        if not runs_root.exists():
            return []
        return sorted(p.name for p in runs_root.iterdir() if p.is_dir())


def _slug(value: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in value)


def make_manifest(
    run_id: str,
    stage: str,
    config: Mapping,
    inputs: Mapping[str, Path],
    outputs: Mapping[str, Path],
    counts: Mapping[str, int],
    started: float,
    deterministic: bool = False,
) -> RunManifest:
    """Assemble a manifest with content digests; timestamps zeroed when deterministic."""
    finished = time.time()
    return RunManifest(
        run_id=run_id,
        stage=stage,
        config=dict(config),
        inputs={name: sha256_digest(p) for name, p in inputs.items() if Path(p).exists()},
        outputs={name: sha256_digest(p) for name, p in outputs.items() if Path(p).exists()},
        counts=dict(counts),
        started=0.0 if deterministic else started,
        finished=0.0 if deterministic else finished,
    )
