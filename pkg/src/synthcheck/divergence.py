"""Disagreement scoring between the model under test and the reference model."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .predict import Prediction

DEFAULT_TOP_K = 10_000


@dataclass(frozen=True)
class DivergenceRecord:
    example_id: str
    task_model_id: str
    ref_model_id: str
    argmax_label: str
    score: float
    rank: int

    def to_record(self) -> dict:
        return {
            "example_id": self.example_id,
            "score": self.score,
            "argmax_label": self.argmax_label,
            "rank": self.rank,
        }


def divergence_score(task_pred: Prediction, ref_pred: Prediction) -> tuple[str, float]:
    """Absolute probability gap on the task model's most likely label.

    Argmax ties go to the lexicographically smallest label so that scores are
    reproducible.
    """
    if task_pred.example_id != ref_pred.example_id:
        raise ValueError(
            f"example id mismatch: {task_pred.example_id!r} vs {ref_pred.example_id!r}"
        )
    if set(task_pred.probs) != set(ref_pred.probs):
        raise ValueError("predictions cover different label sets")
    label = task_pred.argmax()
    return label, abs(task_pred.probs[label] - ref_pred.probs[label])


def rank_hard_subset(
    pairs: Sequence[tuple[Prediction, Prediction]], k: int = DEFAULT_TOP_K
) -> list[DivergenceRecord]:
    """Top-k examples by divergence, score descending with id-ascending tie-break."""
    if k < 0:
        raise ValueError("k must be >= 0")
    scored = []
    for task_pred, ref_pred in pairs:
        label, score = divergence_score(task_pred, ref_pred)
        scored.append((task_pred, ref_pred, label, score))
    scored.sort(key=lambda item: (-item[3], item[0].example_id))
    records = [
        DivergenceRecord(
            example_id=task_pred.example_id,
            task_model_id=task_pred.model_id,
            ref_model_id=ref_pred.model_id,
            argmax_label=label,
            score=score,
            rank=rank,
        )
        for rank, (task_pred, ref_pred, label, score) in enumerate(scored[: min(k, len(scored))], start=1)
    ]
    return records
