"""Rule-based sentence segmentation for post-processing generated text.

A terminator is `.`, `!` or `?` followed by end-of-text, or by whitespace and
then an uppercase letter, a quote character, or a digit. A fixed abbreviation
list suppresses boundaries. Deterministic by construction; sits behind
`extract_first_sentence` so a learned segmenter could be swapped in.
"""
from __future__ import annotations

TERMINATORS = frozenset(".!?")
QUOTE_CHARS = frozenset("\"'“”‘’")
ABBREVIATIONS = frozenset({"mr.", "mrs.", "dr.", "st.", "vs.", "etc.", "e.g.", "i.e."})


def _token_ending_at(text: str, index: int) -> str:
    start = index
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    return text[start : index + 1]


def extract_first_sentence(text: str) -> str:
    """Return the prefix up to and including the first sentence terminator.

    Returns the whole input when no terminator qualifies. Total function.
    """
    n = len(text)
    for i, ch in enumerate(text):
        if ch not in TERMINATORS:
            continue
        if _token_ending_at(text, i).lower() in ABBREVIATIONS:
            continue
        j = i + 1
        if j == n:
            return text
        if not text[j].isspace():
            continue
        while j < n and text[j].isspace():
            j += 1
        if j == n:
            continue
        nxt = text[j]
        if nxt.isupper() or nxt.isdigit() or nxt in QUOTE_CHARS:
            return text[: i + 1]
    return text
