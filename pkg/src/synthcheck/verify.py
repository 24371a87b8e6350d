"""Stage 3: run a model over expanded template cases and report accuracy.

Correctness is argmax-only, never a probability threshold. Accuracy is kept
at full precision in data; rendered tables round to two decimals.
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .predict import Prediction, PredictionError, predict_label_distribution
from .tasks import TaskSpec
from .template import ExpandedCase

MAX_CASE_FAILURE_RATE = 0.05

REPORT_FORMATS = ("markdown", "json", "csv")


class VerificationAborted(RuntimeError):
    """Raised when per-case failures exceed the threshold; partial results kept."""

    def __init__(self, partial: "TemplateResult", errors: list[tuple[int, str]]):
        self.partial = partial
        self.errors = errors
        super().__init__(
            f"aborted template {partial.template_name!r} after {len(errors)} case failures"
        )


@dataclass(frozen=True)
class CaseResult:
    case_index: int
    predicted_label: str
    correct: bool
    probs: Mapping[str, float]


@dataclass(frozen=True)
class TemplateResult:
    template_name: str
    model_id: str
    test_type: str
    gold_label: str
    case_results: tuple[CaseResult, ...]

    @property
    def n_cases(self) -> int:
        return len(self.case_results)

    @property
    def n_correct(self) -> int:
        return sum(1 for case in self.case_results if case.correct)

    @property
    def accuracy_pct(self) -> float:
        if not self.case_results:
            return 0.0
        return 100.0 * self.n_correct / self.n_cases


def result_to_record(result: TemplateResult) -> dict:
    return {
        "template": result.template_name,
        "model_id": result.model_id,
        "test_type": result.test_type,
        "gold_label": result.gold_label,
        "n_cases": result.n_cases,
        "n_correct": result.n_correct,
        "accuracy_pct": result.accuracy_pct,
        "cases": [
            {
                "case_index": case.case_index,
                "predicted_label": case.predicted_label,
                "correct": case.correct,
                "probs": dict(case.probs),
            }
            for case in result.case_results
        ],
    }


def result_from_record(record: Mapping) -> TemplateResult:
    return TemplateResult(
        template_name=record["template"],
        model_id=record["model_id"],
        test_type=record.get("test_type", ""),
        gold_label=record["gold_label"],
        case_results=tuple(
            CaseResult(
                case_index=case["case_index"],
                predicted_label=case["predicted_label"],
                correct=case["correct"],
                probs=dict(case["probs"]),
            )
            for case in record["cases"]
        ),
    )


def evaluate_template(
    cases: Sequence[ExpandedCase],
    backend,
    spec: TaskSpec,
    test_type: str = "",
    max_workers: int = 4,
    max_failure_rate: float = MAX_CASE_FAILURE_RATE,
    on_progress: Callable[[int, int], None] | None = None,
) -> TemplateResult:
    """Classify every expanded case and aggregate accuracy against the gold label."""
    if not cases:
        raise ValueError("cases must be non-empty")
    names = {case.template_name for case in cases}
    if len(names) != 1:
        raise ValueError(f"cases span multiple templates: {sorted(names)}")
    golds = {case.gold_label for case in cases}
    if len(golds) != 1:
        raise ValueError("cases carry differing gold labels")
    gold = cases[0].gold_label
    allowed_failures = max_failure_rate * len(cases)
    errors: list[tuple[int, str]] = []
    results: list[CaseResult] = []

    def one(case: ExpandedCase) -> CaseResult | tuple[int, str]:
        try:
            prediction: Prediction = predict_label_distribution(
                backend, spec, case.text, example_id=f"{case.template_name}:{case.case_index}"
            )
        except PredictionError as exc:
            return (case.case_index, str(exc))
        predicted = prediction.argmax()
        return CaseResult(
            case_index=case.case_index,
            predicted_label=predicted,
            correct=predicted == gold,
            probs=prediction.probs,
        )

    done = 0
    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        for outcome in pool.map(one, cases):
            done += 1
            if on_progress is not None:
                on_progress(done, len(cases))
            if isinstance(outcome, tuple):
                errors.append(outcome)
                if len(errors) > allowed_failures:
                    partial = TemplateResult(
                        template_name=cases[0].template_name,
                        model_id=backend.model_id,
                        test_type=test_type,
                        gold_label=gold,
                        case_results=tuple(results),
                    )
                    raise VerificationAborted(partial, errors)
            else:
                results.append(outcome)
    return TemplateResult(
        template_name=cases[0].template_name,
        model_id=backend.model_id,
        test_type=test_type,
        gold_label=gold,
        case_results=tuple(results),
    )


def per_slot_accuracy(
    result: TemplateResult, cases: Sequence[ExpandedCase], slot: str
) -> list[tuple[str, int, float]]:
    """(lexeme, n_cases, accuracy_pct) per slot value, accuracy descending.

    Groups partition the evaluated cases exactly.
    """
    if not cases or slot not in cases[0].slot_values:
        raise ValueError(f"slot {slot!r} not bound in template {result.template_name!r}")
    by_index = {case.case_index: case for case in cases}
    groups: dict[str, list[CaseResult]] = {}
    for case_result in result.case_results:
        case = by_index.get(case_result.case_index)
        if case is None:
            raise ValueError(f"case index {case_result.case_index} missing from expansion")
        groups.setdefault(case.slot_values[slot], []).append(case_result)
    rows = [
        (
            lexeme,
            len(members),
            100.0 * sum(1 for m in members if m.correct) / len(members),
        )
        for lexeme, members in groups.items()
    ]
    rows.sort(key=lambda row: (-row[2], row[0]))
    return rows


def render_report(results: Sequence[TemplateResult], fmt: str = "markdown") -> str:
    """One row per (template, model): test type, template, accuracy, gold label."""
    if fmt not in REPORT_FORMATS:
        raise ValueError(f"format must be one of {REPORT_FORMATS}")
    if fmt == "json":
        return json.dumps([result_to_record(r) for r in results], indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(
            ["test_type", "template", "model_id", "gold_label", "n_cases", "n_correct", "accuracy_pct"]
        )
        for r in sorted(results, key=lambda r: (r.test_type, r.template_name, r.model_id)):
            writer.writerow(
                [r.test_type, r.template_name, r.model_id, r.gold_label, r.n_cases,
                 r.n_correct, repr(r.accuracy_pct)]
            )
        return buffer.getvalue()
    return _render_markdown(results)


def _render_markdown(results: Sequence[TemplateResult]) -> str:
    models = sorted({r.model_id for r in results})
    header = ["Test Type", "Template"] + [f"{m} (%)" for m in models] + ["Gold Label"]
    lines = ["| " + " | ".join(header) + " |",
             "| " + " | ".join("---" for _ in header) + " |"]
    by_template: dict[tuple[str, str], dict[str, TemplateResult]] = {}
    gold: dict[tuple[str, str], str] = {}
    for r in results:
        key = (r.test_type, r.template_name)
        by_template.setdefault(key, {})[r.model_id] = r
        gold[key] = r.gold_label
    for key in sorted(by_template):
        test_type, template_name = key
        cells = [test_type, template_name]
        for model in models:
            r = by_template[key].get(model)
            cells.append(f"{r.accuracy_pct:.2f}" if r is not None else "")
        cells.append(gold[key])
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
