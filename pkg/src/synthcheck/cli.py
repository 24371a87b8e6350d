"""Command-line entry point wiring all pipeline stages into reproducible runs.

Every stage command is a pure function of (flags, input files, seed);
`--deterministic` zeroes manifest timestamps so reruns are byte-identical.
Exit codes: 0 success, 1 usage error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from .backend import BackendDescriptor, GenerationConfig, HttpBackend
from .divergence import DEFAULT_TOP_K, rank_hard_subset
from .generate import build_synthtest
from .lexicon import dump_lexicon, load_lexicon_dir
from .mock import load_mock_config
from .mockserver import MockBackendServer
from .ngrams import ngram_counts
from .perturb import typo_lexicon
from .predict import Prediction, predict_batch
from .queries import Query, read_corpus, sample_queries
from .runner import run_verification
from .service import WorkbenchService
from .store import (
    DATASET_SCHEMA,
    PREDICTION_SCHEMA,
    QUERY_SCHEMA,
    RANKED_SCHEMA,
    RunLayout,
    append_records,
    make_manifest,
    read_records,
    write_manifest,
)
from .tasks import known_label_sets, load_task_spec
from .template import load_template
from .verify import render_report, result_from_record

ENV_BACKEND_URL = "SYNTHCHECK_BACKEND_URL"
ENV_MODEL_ID = "SYNTHCHECK_MODEL_ID"
ENV_RUN_DIR = "SYNTHCHECK_RUN_DIR"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's default 2
        raise UsageError(message)


def _globals_parser() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--run-dir", default=os.environ.get(ENV_RUN_DIR),
                        help="workspace root; stage outputs land under runs/<run-id>/")
    parent.add_argument("--run-id", default="default")
    parent.add_argument("--seed", type=int, default=0)
    parent.add_argument("--backend-url", default=os.environ.get(ENV_BACKEND_URL))
    parent.add_argument("--model-id", default=os.environ.get(ENV_MODEL_ID))
    parent.add_argument("--max-in-flight", type=int, default=4)
    parent.add_argument("--timeout-ms", type=int, default=30_000)
    parent.add_argument("--deterministic", action="store_true",
                        help="zero timestamps in manifests for byte-identical reruns")
    parent.add_argument("--verbose", action="store_true")
    return parent


def build_parser() -> _Parser:
    parent = _globals_parser()
    parser = _Parser(prog="synthcheck", description=__doc__)
    commands = parser.add_subparsers(dest="command")

    p = commands.add_parser("sample-queries", parents=[parent],
                            help="sample word-prefix queries from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--k", type=int, default=5, help="words per query")
    p.add_argument("--n", type=int, required=True, help="number of queries")
    p.add_argument("--strategy", choices=("first-k", "random-k"), default="first-k")

    p = commands.add_parser("generate", parents=[parent],
                            help="generate the synthetic test set from queries")
    p.add_argument("--queries", required=True)
    p.add_argument("--top-p", type=float, default=1.0)
    p.add_argument("--max-tokens", type=int, default=64)

    p = commands.add_parser("predict", parents=[parent],
                            help="classify a dataset with one model backend")
    p.add_argument("--dataset", required=True)
    p.add_argument("--task", required=True, help="sentiment, toxicity, or a spec JSON path")

    p = commands.add_parser("rank", parents=[parent],
                            help="rank examples by task/reference disagreement")
    p.add_argument("--task-preds", required=True)
    p.add_argument("--ref-preds", required=True)
    p.add_argument("--k", type=int, default=DEFAULT_TOP_K)

    p = commands.add_parser("analyze", parents=[parent],
                            help="frequent n-grams over the ranked hard subset")
    p.add_argument("--ranked", required=True)
    p.add_argument("--dataset", default=None,
                   help="dataset JSONL with texts (default: this run's generate output)")
    p.add_argument("--n-min", type=int, default=2)
    p.add_argument("--n-max", type=int, default=5)
    p.add_argument("--min-count", type=int, default=3)

    p = commands.add_parser("expand", parents=[parent],
                            help="expand a template and print the case count")
    p.add_argument("--template", required=True)
    p.add_argument("--lexicons", default=None, help="lexicon directory (default <run-dir>/lexicons)")
    p.add_argument("--out", default=None, help="optional JSONL file for the expanded cases")

    p = commands.add_parser("verify", parents=[parent],
                            help="evaluate a model over an expanded template")
    p.add_argument("--template", required=True)
    p.add_argument("--task", default=None, help="override the template's task spec")

    p = commands.add_parser("report", parents=[parent],
                            help="render verification results as a table")
    p.add_argument("--results", required=True, help="directory of result JSON files")
    p.add_argument("--format", choices=("markdown", "json", "csv"), default="markdown")
    p.add_argument("--out", default=None)

    p = commands.add_parser("serve", parents=[parent], help="run the workbench HTTP API")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--backend", action="append", default=[],
                   metavar="MODEL_ID=URL", help="repeatable backend registration")
    p.add_argument("--max-jobs", type=int, default=2)

    p = commands.add_parser("serve-mock", parents=[parent], help="run a mock model server")
    p.add_argument("--rules", required=True, help="mock rules JSON file")
    p.add_argument("--port", type=int, default=8976)
    p.add_argument("--host", default="127.0.0.1")

    p = commands.add_parser("perturb", parents=[parent],
                            help="emit a typo-variant lexicon for a key term")
    p.add_argument("--term", required=True)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--out", required=True, help="output .lex path (stem = lexicon name)")

    return parser


def _require_run_dir(args) -> RunLayout:
    if not args.run_dir:
        raise UsageError("--run-dir is required (or set " + ENV_RUN_DIR + ")")
    layout = RunLayout(args.run_dir)
    layout.root.mkdir(parents=True, exist_ok=True)
    return layout


def _resolve(args, path: str | None) -> Path | None:
    """Paths are relative to --run-dir unless absolute."""
    if path is None:
        return None
    p = Path(path)
    if p.is_absolute() or not args.run_dir:
        return p
    return Path(args.run_dir) / p


def _backend(args, kind: str) -> HttpBackend:
    if not args.backend_url:
        raise UsageError("--backend-url is required (or set " + ENV_BACKEND_URL + ")")
    if not args.model_id:
        raise UsageError("--model-id is required (or set " + ENV_MODEL_ID + ")")
    descriptor = BackendDescriptor(
        model_id=args.model_id,
        base_url=args.backend_url,
        kind=kind,
        max_in_flight=args.max_in_flight,
        timeout_ms=args.timeout_ms,
    )
    return HttpBackend(descriptor)


def _say(args, message: str) -> None:
    if args.verbose:
        print(message, file=sys.stderr)


# -- stage commands ----------------------------------------------------------


def cmd_sample_queries(args) -> int:
    layout = _require_run_dir(args)
    started = time.time()
    corpus_path = _resolve(args, args.corpus)
    corpus = read_corpus(corpus_path)
    queries = sample_queries(corpus, args.k, args.n, args.seed, args.strategy)
    out_path = layout.queries_path(args.run_id)
    if out_path.exists():
        out_path.unlink()
    append_records(out_path, [q.to_record() for q in queries], QUERY_SCHEMA)
    manifest = make_manifest(
        args.run_id, "sample-queries",
        {"corpus": args.corpus, "k": args.k, "n": args.n,
         "seed": args.seed, "strategy": args.strategy},
        inputs={"corpus": corpus_path}, outputs={"queries.jsonl": out_path},
        counts={"queries": len(queries)}, started=started,
        deterministic=args.deterministic,
    )
    write_manifest(out_path.parent, manifest)
    print(f"wrote {len(queries)} queries to {out_path}")
    return EXIT_OK


def cmd_generate(args) -> int:
    layout = _require_run_dir(args)
    started = time.time()
    queries_path = _resolve(args, args.queries)
    queries = [Query.from_record(r) for r in read_records(queries_path, QUERY_SCHEMA)]
    backend = _backend(args, "completion")
    config = GenerationConfig(top_p=args.top_p, max_tokens=args.max_tokens, seed=args.seed)
    out_path = layout.dataset_path(args.run_id)
    report = build_synthtest(
        queries, backend, config, out_path,
        max_workers=args.max_in_flight, deterministic=args.deterministic,
    )
    manifest = make_manifest(
        args.run_id, "generate",
        {"queries": args.queries, "top_p": args.top_p, "max_tokens": args.max_tokens,
         "seed": args.seed, "model_id": backend.model_id},
        inputs={"queries.jsonl": queries_path}, outputs={"dataset.jsonl": out_path},
        counts=report.counts(), started=started, deterministic=args.deterministic,
    )
    write_manifest(out_path.parent, manifest)
    print(f"wrote {report.written} examples to {out_path} "
          f"({report.skipped} resumed, {report.dropped} dropped, {len(report.errors)} errors)")
    return EXIT_OK


def cmd_predict(args) -> int:
    layout = _require_run_dir(args)
    started = time.time()
    dataset_path = _resolve(args, args.dataset)
    spec = load_task_spec(args.task)
    backend = _backend(args, "option-scoring")
    items = [(r["id"], r["text"]) for r in read_records(dataset_path, DATASET_SCHEMA)]
    report = predict_batch(backend, spec, items, max_workers=args.max_in_flight)
    if report.aborted:
        raise RuntimeError(
            f"prediction aborted: {len(report.errors)} backend failures "
            f"(first: {report.errors[0][1]})"
        )
    out_path = layout.predictions_path(args.run_id, backend.model_id)
    if out_path.exists():
        out_path.unlink()
    append_records(out_path, [p.to_record() for p in report.predictions], PREDICTION_SCHEMA)
    manifest = make_manifest(
        args.run_id, "predict",
        {"dataset": args.dataset, "task": args.task, "model_id": backend.model_id,
         "seed": args.seed},
        inputs={"dataset.jsonl": dataset_path}, outputs={out_path.name: out_path},
        counts={"predictions": len(report.predictions), "errors": len(report.errors)},
        started=started, deterministic=args.deterministic,
    )
    write_manifest(out_path.parent, manifest)
    print(f"wrote {len(report.predictions)} predictions to {out_path}")
    return EXIT_OK


def cmd_rank(args) -> int:
    layout = _require_run_dir(args)
    started = time.time()
    task_path = _resolve(args, args.task_preds)
    ref_path = _resolve(args, args.ref_preds)
    task_preds = {r["example_id"]: Prediction.from_record(r)
                  for r in read_records(task_path, PREDICTION_SCHEMA)}
    ref_preds = {r["example_id"]: Prediction.from_record(r)
                 for r in read_records(ref_path, PREDICTION_SCHEMA)}
    if set(task_preds) != set(ref_preds):
        only_task = len(set(task_preds) - set(ref_preds))
        only_ref = len(set(ref_preds) - set(task_preds))
        raise RuntimeError(
            f"prediction files cover different examples "
            f"({only_task} only in task, {only_ref} only in reference)"
        )
    pairs = [(task_preds[eid], ref_preds[eid]) for eid in sorted(task_preds)]
    records = rank_hard_subset(pairs, args.k)
    out_path = layout.ranked_path(args.run_id)
    if out_path.exists():
        out_path.unlink()
    append_records(out_path, [r.to_record() for r in records], RANKED_SCHEMA)
    task_model = next(iter(task_preds.values())).model_id if task_preds else ""
    ref_model = next(iter(ref_preds.values())).model_id if ref_preds else ""
    manifest = make_manifest(
        args.run_id, "rank",
        {"task_preds": args.task_preds, "ref_preds": args.ref_preds, "k": args.k,
         "task_model_id": task_model, "ref_model_id": ref_model},
        inputs={"task_preds": task_path, "ref_preds": ref_path},
        outputs={"ranked.jsonl": out_path},
        counts={"ranked": len(records), "scored": len(pairs)},
        started=started, deterministic=args.deterministic,
    )
    write_manifest(out_path.parent, manifest)
    print(f"wrote {len(records)} ranked examples to {out_path}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    layout = _require_run_dir(args)
    started = time.time()
    ranked_path = _resolve(args, args.ranked)
    dataset_path = _resolve(args, args.dataset) if args.dataset else layout.dataset_path(args.run_id)
    ranked_ids = [r["example_id"] for r in read_records(ranked_path, RANKED_SCHEMA)]
    texts = {r["id"]: r["text"] for r in read_records(dataset_path, DATASET_SCHEMA)}
    hard = {eid: texts[eid] for eid in ranked_ids if eid in texts}
    stats = ngram_counts(hard, args.n_min, args.n_max, args.min_count)
    out_path = layout.ngrams_path(args.run_id)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(
        json.dumps([s.to_record() for s in stats], indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8", newline="\n",
    )
    manifest = make_manifest(
        args.run_id, "analyze",
        {"ranked": args.ranked, "dataset": args.dataset or "", "n_min": args.n_min,
         "n_max": args.n_max, "min_count": args.min_count},
        inputs={"ranked.jsonl": ranked_path, "dataset.jsonl": dataset_path},
        outputs={"ngrams.json": out_path},
        counts={"ngrams": len(stats), "texts": len(hard)},
        started=started, deterministic=args.deterministic,
    )
    write_manifest(out_path.parent, manifest)
    print(f"wrote {len(stats)} n-gram stats to {out_path}")
    return EXIT_OK


def cmd_expand(args) -> int:
    from .template import expansion_count, iter_expand

    template_path = _resolve(args, args.template)
    template = load_template(template_path, known_label_sets())
    if args.lexicons:
        lexicons_dir = _resolve(args, args.lexicons)
    elif args.run_dir:
        lexicons_dir = RunLayout(args.run_dir).lexicons_dir
    else:
        raise UsageError("need --lexicons or --run-dir to locate lexicon files")
    lexicons = load_lexicon_dir(lexicons_dir)
    count = expansion_count(template, lexicons)
    if args.out:
        out_path = _resolve(args, args.out)
        if out_path.exists():
            out_path.unlink()
        records = (
            {"template": c.template_name, "case_index": c.case_index, "text": c.text,
             "gold_label": c.gold_label, "slot_values": dict(c.slot_values)}
            for c in iter_expand(template, lexicons)
        )
        append_records(out_path, records)
        _say(args, f"wrote {count} cases to {out_path}")
    print(count)
    return EXIT_OK


def cmd_verify(args) -> int:
    layout = _require_run_dir(args)
    template_path = _resolve(args, args.template)
    template = load_template(template_path, known_label_sets())
    spec = load_task_spec(args.task) if args.task else load_task_spec(template.task)
    backend = _backend(args, "option-scoring")
    result, out_path = run_verification(
        layout, args.run_id, template, backend, spec=spec,
        deterministic=args.deterministic, max_workers=args.max_in_flight,
    )
    print(f"{template.name} x {backend.model_id}: "
          f"{result.accuracy_pct:.2f}% ({result.n_correct}/{result.n_cases}) -> {out_path}")
    return EXIT_OK


def cmd_report(args) -> int:
    results_dir = _resolve(args, args.results)
    results = []
    for path in sorted(Path(results_dir).glob("*.json")):
        results.append(result_from_record(json.loads(path.read_text(encoding="utf-8"))))
    document = render_report(results, args.format)
    if args.out:
        out_path = _resolve(args, args.out)
        out_path.write_text(document, encoding="utf-8", newline="\n")
        print(f"wrote report to {out_path}")
    else:
        sys.stdout.write(document)
    return EXIT_OK


def cmd_serve(args) -> int:
    layout = _require_run_dir(args)
    backends: dict[str, BackendDescriptor] = {}
    for spec in args.backend:
        model_id, _, url = spec.partition("=")
        if not model_id or not url:
            raise UsageError(f"--backend needs MODEL_ID=URL, got {spec!r}")
        backends[model_id] = BackendDescriptor(
            model_id=model_id, base_url=url, kind="both",
            max_in_flight=args.max_in_flight, timeout_ms=args.timeout_ms,
        )
    if args.backend_url and args.model_id and args.model_id not in backends:
        backends[args.model_id] = BackendDescriptor(
            model_id=args.model_id, base_url=args.backend_url, kind="both",
            max_in_flight=args.max_in_flight, timeout_ms=args.timeout_ms,
        )
    try:
        service = WorkbenchService(
            layout.root, backends, run_id=args.run_id, host=args.host, port=args.port,
            max_jobs=args.max_jobs, deterministic=args.deterministic,
        )
    except OSError as exc:
        raise RuntimeError(f"cannot bind {args.host}:{args.port}: {exc}") from exc
    print(f"workbench API listening on {service.base_url}")
    try:
        service.serve_forever()
    except KeyboardInterrupt:
        service.shutdown()
    return EXIT_OK


def cmd_serve_mock(args) -> int:
    config = load_mock_config(_resolve(args, args.rules))
    try:
        server = MockBackendServer(config, host=args.host, port=args.port)
    except OSError as exc:
        raise RuntimeError(f"cannot bind {args.host}:{args.port}: {exc}") from exc
    print(f"mock model {config.model_id!r} listening on {server.base_url}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return EXIT_OK


def cmd_perturb(args) -> int:
    out_path = _resolve(args, args.out)
    lexicon = typo_lexicon(out_path.stem, args.term, args.n, args.seed)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(dump_lexicon(lexicon), encoding="utf-8", newline="\n")
    print(f"wrote {len(lexicon)} typo variants to {out_path}")
    return EXIT_OK


_COMMANDS = {
    "sample-queries": cmd_sample_queries,
    "generate": cmd_generate,
    "predict": cmd_predict,
    "rank": cmd_rank,
    "analyze": cmd_analyze,
    "expand": cmd_expand,
    "verify": cmd_verify,
    "report": cmd_report,
    "serve": cmd_serve,
    "serve-mock": cmd_serve_mock,
    "perturb": cmd_perturb,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        if getattr(args, "verbose", False):
            raise
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
