"""Label-distribution prediction: option scoring under a few-shot prompt."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .tasks import TaskSpec, build_fewshot_prompt

PROB_SUM_TOLERANCE = 1e-9


class PredictionError(RuntimeError):
    """Backend failure while classifying one example; carries the example id."""

    def __init__(self, example_id: str, message: str):
        self.example_id = example_id
        super().__init__(f"example {example_id!r}: {message}")


@dataclass(frozen=True)
class Prediction:
    example_id: str
    model_id: str
    probs: Mapping[str, float]

    def argmax(self) -> str:
        """Most likely label; ties resolved to the lexicographically smallest."""
        return min(self.probs.items(), key=lambda item: (-item[1], item[0]))[0]

    def to_record(self) -> dict:
        return {
            "example_id": self.example_id,
            "model_id": self.model_id,
            "probs": dict(self.probs),
        }

    @staticmethod
    def from_record(record: dict) -> "Prediction":
        return Prediction(record["example_id"], record["model_id"], dict(record["probs"]))


def normalize_option_scores(raw: Mapping[str, float]) -> dict[str, float]:
    """Softmax over log-scores with max-subtraction for numerical stability."""
    if not raw:
        raise ValueError("no scores to normalize")
    for key, value in raw.items():
        if not math.isfinite(value):
            raise ValueError(f"non-finite score for {key!r}: {value!r}")
    peak = max(raw.values())
    exps = {key: math.exp(value - peak) for key, value in raw.items()}
    total = sum(exps.values())
    return {key: value / total for key, value in exps.items()}


def predict_label_distribution(
    backend, spec: TaskSpec, text: str, example_id: str = ""
) -> Prediction:
    """Score the task's answer options under the few-shot prompt and normalize."""
    prompt = build_fewshot_prompt(spec, text)
    options = [spec.option_strings[label] for label in spec.label_set]
    try:
        scores = backend.score_options(prompt, options)
    except Exception as exc:
        raise PredictionError(example_id, str(exc)) from exc
    label_scores = {
        label: scores[spec.option_strings[label]] for label in spec.label_set
    }
    probs = normalize_option_scores(label_scores)
    return Prediction(example_id=example_id, model_id=backend.model_id, probs=probs)


@dataclass
class BatchReport:
    predictions: list[Prediction]
    errors: list[tuple[str, str]]
    aborted: bool = False


def predict_batch(
    backend,
    spec: TaskSpec,
    items: Sequence[tuple[str, str]],
    max_workers: int = 4,
    max_failure_rate: float = 0.1,
) -> BatchReport:
    """Classify (example_id, text) pairs with bounded fan-out, preserving order.

    Per-example backend failures are recorded and the run continues; the batch
    aborts once the failure count exceeds max_failure_rate of the input.
    """
    report = BatchReport(predictions=[], errors=[])
    if not items:
        return report
    allowed_failures = max_failure_rate * len(items)

    def one(item: tuple[str, str]) -> Prediction | PredictionError:
        example_id, text = item
        try:
            return predict_label_distribution(backend, spec, text, example_id)
        except PredictionError as exc:
            return exc

    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        for outcome in pool.map(one, items):
            if isinstance(outcome, PredictionError):
                report.errors.append((outcome.example_id, str(outcome)))
                if len(report.errors) > allowed_failures:
                    report.aborted = True
                    break
            else:
                report.predictions.append(outcome)
    return report
