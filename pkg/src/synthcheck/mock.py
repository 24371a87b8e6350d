"""Deterministic local model doubles: a lexicon classifier and a seeded completer.

The classifier scores a text by counting polarity-term hits; the
negation-aware variant flips a term's polarity when a negation marker occurs
within three tokens before it. Pairing a negation-blind and a negation-aware
instance plants a known disagreement for the ranking pipeline to surface.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

DEFAULT_NEGATION_MARKERS = ("not", "n't", "never", "don't", "isn't")
DEFAULT_SCALE = 2.0

# Word-salad vocabulary for seeded completions: mostly neutral filler, one
# negation marker, and a few positive adjectives shared with the POS_ADJ
# fixture lexicon so classifier doubles have something to react to.
DEFAULT_VOCAB = (
    "the", "a", "this", "that", "it", "was", "is", "were", "been", "seems",
    "looked", "felt", "story", "scene", "acting", "plot", "music", "evening",
    "crowd", "friend", "again", "here", "there", "quite", "rather", "really",
    "not", "great", "super", "perfect",
)

# Which answer options count toward the positive-class axis of the classifier.
DEFAULT_OPTION_POLARITY = {"positive": 1, "negative": -1, "Yes": 1, "No": -1}

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_U64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash; explicit algorithm for cross-platform stability."""
    value = FNV64_OFFSET
    for byte in data:
        value = ((value ^ byte) * FNV64_PRIME) & _U64
    return value


@dataclass(frozen=True)
class LexiconClassifierRule:
    positive_terms: frozenset[str]
    negative_terms: frozenset[str]
    negation_aware: bool = False
    negation_markers: tuple[str, ...] = DEFAULT_NEGATION_MARKERS
    scale: float = DEFAULT_SCALE

    def __post_init__(self):
        overlap = self.positive_terms & self.negative_terms
        if overlap:
            raise ValueError(f"terms in both polarities: {sorted(overlap)}")


def _tokens(text: str) -> list[str]:
    out = []
    for tok in text.lower().split():
        start, end = 0, len(tok)
        while start < end and not tok[start].isalnum():
            start += 1
        while end > start and not tok[end - 1].isalnum():
            end -= 1
        if start < end:
            out.append(tok[start:end])
    return out


def _is_marker(token: str, markers: Sequence[str]) -> bool:
    return token in markers or token.endswith("n't")


def lexicon_classify(rule: LexiconClassifierRule, text: str) -> dict[str, float]:
    """Log-scores (+base, -base) on (positive, negative), scaled for confidence."""
    tokens = _tokens(text)
    base = 0
    for index, token in enumerate(tokens):
        if token in rule.positive_terms:
            polarity = 1
        elif token in rule.negative_terms:
            polarity = -1
        else:
            continue
        if rule.negation_aware and any(
            _is_marker(tokens[j], rule.negation_markers)
            for j in range(max(0, index - 3), index)
        ):
            polarity = -polarity
        base += polarity
    return {"positive": rule.scale * base, "negative": -rule.scale * base}


def seeded_completion(
    seed: int, prompt: str, max_tokens: int, vocabulary: Sequence[str] = DEFAULT_VOCAB
) -> str:
    """Deterministic word-salad continuation keyed on (seed, hash(prompt))."""
    if max_tokens < 1:
        raise ValueError("max_tokens must be >= 1")
    key = ((seed & _U64) << 64) | fnv1a64(prompt.encode("utf-8"))
    rng = random.Random(key)
    low = max(1, (max_tokens * 2) // 3)
    count = rng.randint(low, max_tokens)
    return " " + " ".join(rng.choice(vocabulary) for _ in range(count))


def extract_prompt_target(prompt: str) -> str:
    """Pull the target text out of a few-shot classification prompt.

    Understands the Question/Answer and quoted Text/Answer prompt styles; any
    other shape is scored whole. This keeps exemplar text from polluting the
    mock's term counts.
    """
    body = prompt
    answer_cue = "\n\nAnswer:"
    if body.endswith(answer_cue):
        body = body[: -len(answer_cue)]
    split_at = body.rfind("\n\n")
    block = body[split_at + 2 :] if split_at >= 0 else body
    colon = block.rfind(": ")
    candidate = block[colon + 2 :] if colon >= 0 else block
    if len(candidate) >= 2 and candidate.startswith('"') and candidate.endswith('"'):
        candidate = candidate[1:-1]
    return candidate


@dataclass(frozen=True)
class MockModelConfig:
    """One mock model: classifier rule plus completion settings."""

    model_id: str
    rule: LexiconClassifierRule
    option_polarity: Mapping[str, int] = field(
        default_factory=lambda: dict(DEFAULT_OPTION_POLARITY)
    )
    vocabulary: tuple[str, ...] = DEFAULT_VOCAB
    seed: int = 0

    def complete(self, prompt: str, max_tokens: int, seed: int | None = None) -> str:
        return seeded_completion(
            self.seed if seed is None else seed, prompt, max_tokens, self.vocabulary
        )

    def score_options(self, prompt: str, options: Sequence[str]) -> dict[str, float]:
        target = extract_prompt_target(prompt)
        axis = lexicon_classify(self.rule, target)
        scores: dict[str, float] = {}
        for option in options:
            polarity = self.option_polarity.get(option, 0)
            if polarity > 0:
                scores[option] = axis["positive"]
            elif polarity < 0:
                scores[option] = axis["negative"]
            else:
                scores[option] = 0.0
        return scores


def load_mock_config(path: str | Path) -> MockModelConfig:
    """Read a mock rules JSON file (see README for the schema)."""
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return mock_config_from_obj(obj)


def mock_config_from_obj(obj: Mapping) -> MockModelConfig:
    rule = LexiconClassifierRule(
        positive_terms=frozenset(obj.get("positive_terms", ())),
        negative_terms=frozenset(obj.get("negative_terms", ())),
        negation_aware=bool(obj.get("negation_aware", False)),
        negation_markers=tuple(obj.get("negation_markers", DEFAULT_NEGATION_MARKERS)),
        scale=float(obj.get("scale", DEFAULT_SCALE)),
    )
    return MockModelConfig(
        model_id=obj.get("model_id", "mock"),
        rule=rule,
        option_polarity=dict(obj.get("option_polarity", DEFAULT_OPTION_POLARITY)),
        vocabulary=tuple(obj.get("vocabulary", DEFAULT_VOCAB)),
        seed=int(obj.get("seed", 0)),
    )
