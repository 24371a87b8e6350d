"""Frequent n-grams over the hard subset, and grouping of examples by n-gram.

Tokenization: lowercase, split on Unicode whitespace, strip leading and
trailing non-alphanumeric characters from each token. Each example counts a
given n-gram at most once (type frequency over examples).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence


@dataclass(frozen=True)
class NgramStat:
    ngram: tuple[str, ...]
    n: int
    count: int
    example_ids: tuple[str, ...]

    def to_record(self) -> dict:
        return {"ngram": list(self.ngram), "count": self.count, "example_ids": list(self.example_ids)}


def _strip_edges(token: str) -> str:
    start = 0
    end = len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[start:end]


def tokenize(text: str) -> list[str]:
    return [stripped for tok in text.lower().split() if (stripped := _strip_edges(tok))]


def _ngrams_of(tokens: Sequence[str], n: int) -> set[tuple[str, ...]]:
    return {tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)}


def ngram_counts(
    texts: Mapping[str, str],
    n_min: int = 2,
    n_max: int = 5,
    min_count: int = 3,
) -> list[NgramStat]:
    """Count how many examples contain each n-gram, most frequent first.

    Output is sorted by (count descending, n-gram lexicographic); n-grams seen
    in fewer than min_count examples are dropped.
    """
    if not (1 <= n_min <= n_max):
        raise ValueError("need 1 <= n_min <= n_max")
    hits: dict[tuple[str, ...], list[str]] = {}
    for example_id in sorted(texts):
        tokens = tokenize(texts[example_id])
        grams: set[tuple[str, ...]] = set()
        for n in range(n_min, n_max + 1):
            grams |= _ngrams_of(tokens, n)
        for gram in grams:
            hits.setdefault(gram, []).append(example_id)
    stats = [
        NgramStat(ngram=gram, n=len(gram), count=len(ids), example_ids=tuple(ids))
        for gram, ids in hits.items()
        if len(ids) >= min_count
    ]
    stats.sort(key=lambda s: (-s.count, s.ngram))
    return stats


def cluster_by_ngram(texts: Mapping[str, str], ngram: Sequence[str]) -> list[str]:
    """Ids of all texts containing the n-gram as a contiguous token run, ascending."""
    if not ngram:
        raise ValueError("ngram must be non-empty")
    target = tuple(ngram)
    n = len(target)
    matched: list[str] = []
    for example_id in sorted(texts):
        tokens = tokenize(texts[example_id])
        if any(tuple(tokens[i : i + n]) == target for i in range(len(tokens) - n + 1)):
            matched.append(example_id)
    return matched
