"""Adversarial text perturbations: single-edit typos and nonsense-character affixes."""
from __future__ import annotations

import random
import string
from dataclasses import dataclass

from .lexicon import Lexicon

INSERT_ALPHABET = string.ascii_lowercase

# Printable ASCII 0x21-0x7E minus letters: digits plus punctuation/symbols.
NONSENSE_POOL = "".join(
    chr(code) for code in range(0x21, 0x7F) if not chr(code).isalpha()
)

AFFIX_POSITIONS = ("prefix", "suffix")


@dataclass(frozen=True)
class PerturbationSpec:
    kind: str
    params: dict
    seed: int


def _edit_space_size(term: str) -> int:
    n = len(term)
    return n + len(INSERT_ALPHABET) * (n + 1) + (n - 1)


def _apply_edit(term: str, edit_index: int) -> str:
    """Apply the edit_index-th atomic edit: delete, insert, or adjacent transposition."""
    n = len(term)
    if edit_index < n:
        return term[:edit_index] + term[edit_index + 1 :]
    edit_index -= n
    n_inserts = len(INSERT_ALPHABET) * (n + 1)
    if edit_index < n_inserts:
        pos, char_index = divmod(edit_index, len(INSERT_ALPHABET))
        return term[:pos] + INSERT_ALPHABET[char_index] + term[pos:]
    pos = edit_index - n_inserts
    return term[:pos] + term[pos + 1] + term[pos] + term[pos + 2 :]


def all_typo_variants(term: str) -> set[str]:
    """Every distinct single-edit variant that differs from the source term."""
    variants = {_apply_edit(term, i) for i in range(_edit_space_size(term))}
    variants.discard(term)
    return variants


def typo_variants(term: str, n_variants: int, seed: int) -> list[str]:
    """Draw n distinct single-edit typos, uniform over (operation, position, char).

    Each variant is produced by exactly one edit: deleting one character,
    inserting one lowercase letter, or transposing one adjacent pair. Draws
    that reproduce the source term or an already-chosen variant are rejected.
    """
    if len(term) < 2:
        raise ValueError("term must have at least 2 characters")
    if n_variants < 1:
        raise ValueError("n_variants must be >= 1")
    achievable = len(all_typo_variants(term))
    if achievable < n_variants:
        raise ValueError(
            f"only {achievable} distinct variants exist for {term!r}; "
            f"{n_variants} requested"
        )
    rng = random.Random(seed)
    space = _edit_space_size(term)
    chosen: list[str] = []
    seen: set[str] = set()
    while len(chosen) < n_variants:
        variant = _apply_edit(term, rng.randrange(space))
        if variant == term or variant in seen:
            continue
        seen.add(variant)
        chosen.append(variant)
    return chosen


def nonsense_string(min_len: int, max_len: int, seed: int) -> str:
    """A random non-alphabetic ASCII string with length uniform in [min_len, max_len]."""
    if not (1 <= min_len <= max_len):
        raise ValueError("need 1 <= min_len <= max_len")
    rng = random.Random(seed)
    length = rng.randint(min_len, max_len)
    return "".join(rng.choice(NONSENSE_POOL) for _ in range(length))


def apply_affix(sentence: str, affix: str, position: str) -> str:
    """Concatenate an affix before or after a sentence, with no separator."""
    if position not in AFFIX_POSITIONS:
        raise ValueError(f"position must be one of {AFFIX_POSITIONS}")
    if position == "prefix":
        return affix + sentence
    return sentence + affix


def typo_lexicon(name: str, term: str, n_variants: int, seed: int) -> Lexicon:
    """A lexicon of typo variants, ready to bind to a template slot."""
    return Lexicon(name, tuple(typo_variants(term, n_variants, seed)))
