"""Seeding queries: word prefixes sampled from a line-oriented corpus."""
from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

STRATEGIES = ("first-k", "random-k")


@dataclass(frozen=True)
class Query:
    id: str
    words: tuple[str, ...]
    source_line: int

    def to_record(self) -> dict:
        return {"id": self.id, "words": list(self.words), "source_line": self.source_line}

    @staticmethod
    def from_record(record: dict) -> "Query":
        return Query(record["id"], tuple(record["words"]), record["source_line"])


def read_corpus(path: str | Path) -> list[str]:
    return Path(path).read_text(encoding="utf-8").splitlines()


def sample_queries(
    corpus: Sequence[str],
    k_words: int = 5,
    n_queries: int = 0,
    seed: int = 0,
    strategy: str = "first-k",
) -> list[Query]:
    """Sample sentences uniformly and take k words from each as a query.

    Sampling is without replacement, falling back to with-replacement when the
    corpus holds fewer eligible sentences than requested. Sentences with fewer
    than k whitespace tokens are skipped. `first-k` takes the leading k tokens;
    `random-k` draws k tokens at random from anywhere in the sentence.
    """
    if k_words < 1:
        raise ValueError("k_words must be >= 1")
    if n_queries < 0:
        raise ValueError("n_queries must be >= 0")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    eligible: list[tuple[int, list[str]]] = []
    for lineno, line in enumerate(corpus, start=1):
        tokens = line.split()
        if len(tokens) >= k_words:
            eligible.append((lineno, tokens))
    if not eligible:
        raise ValueError("corpus has no sentences with enough tokens")
    rng = random.Random(seed)
    if n_queries <= len(eligible):
        drawn = rng.sample(eligible, n_queries)
    else:
        drawn = [rng.choice(eligible) for _ in range(n_queries)]
    queries: list[Query] = []
    for index, (lineno, tokens) in enumerate(drawn):
        if strategy == "first-k":
            words = tokens[:k_words]
        else:
            words = rng.sample(tokens, k_words)
        queries.append(Query(id=f"q{index:06d}", words=tuple(words), source_line=lineno))
    return queries
