from __future__ import annotations

import json
import shutil
from pathlib import Path

import pytest

from synthcheck.cli import main
from synthcheck.lexicon import load_lexicon
from synthcheck.store import read_records

from conftest import FIXTURES


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


def test_no_arguments_is_usage_error(capsys):
    assert run_cli() == 1
    err = capsys.readouterr().err
    assert "usage" in err.lower()


def test_unknown_flag_is_usage_error(capsys):
    assert run_cli("expand", "--nonsense") == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_command_is_usage_error():
    assert run_cli("frobnicate") == 1


def test_missing_input_file_is_runtime_error(workspace, capsys):
    code = run_cli("rank", "--run-dir", workspace,
                   "--task-preds", "nope.jsonl", "--ref-preds", "nope.jsonl")
    assert code == 2
    assert "error" in capsys.readouterr().err.lower()


def test_expand_prints_1411(workspace, capsys):
    code = run_cli("expand", "--run-dir", workspace,
                   "--template", "templates/negation-neg.json")
    assert code == 0
    assert capsys.readouterr().out.strip() == "1411"


def test_expand_with_explicit_lexicon_dir(capsys, tmp_path):
    code = run_cli("expand",
                   "--template", FIXTURES / "templates" / "negation-pos.json",
                   "--lexicons", FIXTURES / "lexicons")
    assert code == 0
    assert capsys.readouterr().out.strip() == "2988"


def test_expand_writes_cases_jsonl(workspace, capsys, tmp_path):
    out = tmp_path / "cases.jsonl"
    code = run_cli("expand", "--run-dir", workspace,
                   "--template", "templates/simple-pos.json", "--out", out)
    assert code == 0
    records = list(read_records(out))
    assert len(records) == 2988
    assert records[0]["text"] == "This book is appealing."


def test_perturb_emits_loadable_lexicon(tmp_path, capsys):
    out = tmp_path / "DESERVE_TYPO.lex"
    code = run_cli("perturb", "--term", "deserve to", "--n", "50", "--seed", "3",
                   "--out", out)
    assert code == 0
    lexicon = load_lexicon(out)
    assert lexicon.name == "DESERVE_TYPO"
    assert len(lexicon) == 50


def test_sample_queries_writes_jsonl_and_manifest(workspace, capsys):
    shutil.copy(FIXTURES / "corpus" / "corpus_500.txt", workspace / "corpus.txt")
    code = run_cli("sample-queries", "--run-dir", workspace, "--corpus", "corpus.txt",
                   "--k", "5", "--n", "20", "--seed", "11", "--deterministic")
    assert code == 0
    queries_path = workspace / "runs" / "default" / "sample-queries" / "queries.jsonl"
    records = list(read_records(queries_path))
    assert len(records) == 20
    assert all(len(r["words"]) == 5 for r in records)
    manifest = json.loads((queries_path.parent / "manifest.json").read_text())
    assert manifest["counts"]["queries"] == 20
    assert manifest["started"] == 0.0


def run_pipeline(workspace: Path, blind_url: str, aware_url: str, run_id: str) -> None:
    base = ["--run-dir", workspace, "--run-id", run_id, "--deterministic", "--seed", "5"]
    shutil.copy(FIXTURES / "corpus" / "corpus_500.txt", workspace / "corpus.txt")
    assert run_cli("sample-queries", *base, "--corpus", "corpus.txt", "--k", "5", "--n", "60") == 0
    assert run_cli("generate", *base, "--queries", f"runs/{run_id}/sample-queries/queries.jsonl",
                   "--backend-url", blind_url, "--model-id", "mock-blind",
                   "--top-p", "1.0", "--max-tokens", "16") == 0
    dataset = f"runs/{run_id}/generate/dataset.jsonl"
    assert run_cli("predict", *base, "--dataset", dataset, "--task", "sentiment",
                   "--backend-url", blind_url, "--model-id", "mock-blind") == 0
    assert run_cli("predict", *base, "--dataset", dataset, "--task", "sentiment",
                   "--backend-url", aware_url, "--model-id", "mock-aware") == 0
    assert run_cli("rank", *base,
                   "--task-preds", f"runs/{run_id}/predict/predictions-mock-blind.jsonl",
                   "--ref-preds", f"runs/{run_id}/predict/predictions-mock-aware.jsonl",
                   "--k", "12") == 0
    assert run_cli("analyze", *base, "--ranked", f"runs/{run_id}/rank/ranked.jsonl",
                   "--n-min", "2", "--n-max", "4", "--min-count", "2") == 0
    assert run_cli("verify", *base, "--template", "templates/negation-pos.json",
                   "--backend-url", blind_url, "--model-id", "mock-blind") == 0


def test_full_pipeline_and_determinism(workspace, tmp_path, blind_server, aware_server, capsys):
    run_pipeline(workspace, blind_server.base_url, aware_server.base_url, "run-a")

    ranked = list(read_records(workspace / "runs" / "run-a" / "rank" / "ranked.jsonl"))
    assert len(ranked) == 12
    assert [r["rank"] for r in ranked] == list(range(1, 13))
    scores = [r["score"] for r in ranked]
    assert scores == sorted(scores, reverse=True)

    ngrams = json.loads((workspace / "runs" / "run-a" / "analyze" / "ngrams.json").read_text())
    assert isinstance(ngrams, list)

    result_path = workspace / "runs" / "run-a" / "verify" / "negation-pos--mock-blind.json"
    result = json.loads(result_path.read_text())
    assert result["n_cases"] == 2988
    assert result["accuracy_pct"] == 0.0

    report_code = run_cli("report", "--run-dir", workspace,
                          "--results", "runs/run-a/verify", "--format", "markdown")
    assert report_code == 0
    out = capsys.readouterr().out
    assert "negation-pos" in out and "0.00" in out

    # Identical flags (same run id) in a fresh workspace: byte-identical artifacts.
    workspace_b = tmp_path / "work-b"
    workspace_b.mkdir()
    shutil.copytree(FIXTURES / "lexicons", workspace_b / "lexicons")
    shutil.copytree(FIXTURES / "templates", workspace_b / "templates")
    run_pipeline(workspace_b, blind_server.base_url, aware_server.base_url, "run-a")
    for rel in [
        "sample-queries/queries.jsonl", "sample-queries/manifest.json",
        "generate/dataset.jsonl", "generate/manifest.json",
        "predict/predictions-mock-blind.jsonl", "predict/predictions-mock-aware.jsonl",
        "rank/ranked.jsonl", "rank/manifest.json",
        "analyze/ngrams.json", "analyze/manifest.json",
        "verify/negation-pos--mock-blind.json",
    ]:
        a = (workspace / "runs" / "run-a" / rel).read_bytes()
        b = (workspace_b / "runs" / "run-a" / rel).read_bytes()
        assert a == b, f"artifact differs across reruns: {rel}"


def test_report_json_and_csv_formats(workspace, blind_server, capsys, tmp_path):
    base = ["--run-dir", workspace, "--deterministic"]
    assert run_cli("verify", *base, "--template", "templates/simple-pos.json",
                   "--backend-url", blind_server.base_url, "--model-id", "mock-blind") == 0
    capsys.readouterr()
    assert run_cli("report", *base, "--results", "runs/default/verify", "--format", "json") == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload[0]["template"] == "simple-pos"
    out_file = tmp_path / "report.csv"
    assert run_cli("report", *base, "--results", "runs/default/verify",
                   "--format", "csv", "--out", out_file) == 0
    assert out_file.read_text().splitlines()[0].startswith("test_type,")


def test_backend_env_override(workspace, blind_server, monkeypatch, capsys):
    monkeypatch.setenv("SYNTHCHECK_BACKEND_URL", blind_server.base_url)
    monkeypatch.setenv("SYNTHCHECK_MODEL_ID", "mock-blind")
    code = run_cli("verify", "--run-dir", workspace, "--deterministic",
                   "--template", "templates/simple-neg.json")
    assert code == 0
    assert "100.00%" in capsys.readouterr().out
