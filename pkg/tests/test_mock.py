from __future__ import annotations

import json

import pytest

from synthcheck.lexicon import Lexicon
from synthcheck.mock import (
    DEFAULT_VOCAB,
    LexiconClassifierRule,
    MockModelConfig,
    extract_prompt_target,
    fnv1a64,
    lexicon_classify,
    load_mock_config,
    seeded_completion,
)
from synthcheck.predict import normalize_option_scores
from synthcheck.tasks import build_fewshot_prompt, load_task_spec
from synthcheck.template import expand, load_template

from conftest import FIXTURES, make_rule


# -- classifier rule -----------------------------------------------------------


def test_blind_rule_ignores_negation():
    rule = LexiconClassifierRule(frozenset({"nice"}), frozenset({"awful"}))
    scores = lexicon_classify(rule, "This book is not nice.")
    assert scores["positive"] > scores["negative"]


def test_aware_rule_flips_negated_term():
    rule = LexiconClassifierRule(frozenset({"nice"}), frozenset({"awful"}), negation_aware=True)
    scores = lexicon_classify(rule, "This book is not nice.")
    assert scores["negative"] > scores["positive"]


def test_no_matched_terms_gives_uniform_distribution():
    rule = LexiconClassifierRule(frozenset({"nice"}), frozenset({"awful"}))
    scores = lexicon_classify(rule, "nothing matches here")
    assert scores == {"positive": 0.0, "negative": 0.0}
    assert normalize_option_scores(scores) == {"positive": 0.5, "negative": 0.5}


def test_negation_window_is_three_tokens():
    rule = LexiconClassifierRule(frozenset({"nice"}), frozenset(), negation_aware=True)
    flipped = lexicon_classify(rule, "not one two nice")
    assert flipped["negative"] > 0
    out_of_window = lexicon_classify(rule, "not one two three nice")
    assert out_of_window["positive"] > 0


def test_contraction_markers_detected():
    rule = LexiconClassifierRule(frozenset({"nice"}), frozenset(), negation_aware=True)
    assert lexicon_classify(rule, "it isn't nice")["negative"] > 0
    assert lexicon_classify(rule, "it can't be nice")["negative"] > 0


def test_scale_is_two_per_unit_of_evidence():
    rule = LexiconClassifierRule(frozenset({"nice"}), frozenset())
    assert lexicon_classify(rule, "nice")["positive"] == 2.0
    assert lexicon_classify(rule, "nice nice")["positive"] == 4.0


def test_overlapping_polarities_rejected():
    with pytest.raises(ValueError):
        LexiconClassifierRule(frozenset({"x"}), frozenset({"x"}))


# -- seeded completion ----------------------------------------------------------


def test_fnv1a64_known_vectors():
    # Published FNV-1a 64 test vectors.
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


def test_completion_deterministic():
    assert seeded_completion(3, "abc", 8) == seeded_completion(3, "abc", 8)


def test_completion_varies_with_prompt_and_seed():
    assert seeded_completion(3, "abc", 12) != seeded_completion(3, "abd", 12)
    assert seeded_completion(3, "abc", 12) != seeded_completion(4, "abc", 12)


def test_completion_token_bound():
    for max_tokens in (1, 4, 16):
        text = seeded_completion(0, "prompt", max_tokens)
        assert 1 <= len(text.split()) <= max_tokens


def test_completion_draws_from_vocabulary():
    words = set(seeded_completion(0, "prompt", 32).split())
    assert words <= set(DEFAULT_VOCAB)


def test_completion_starts_with_separator_space():
    assert seeded_completion(0, "x", 4).startswith(" ")


# -- prompt target extraction -----------------------------------------------------


def test_extracts_sentiment_style_target():
    spec = load_task_spec("sentiment")
    prompt = build_fewshot_prompt(spec, "the crowd was quiet")
    assert extract_prompt_target(prompt) == "the crowd was quiet"


def test_extracts_toxicity_style_target():
    spec = load_task_spec("toxicity")
    prompt = build_fewshot_prompt(spec, "the crowd was quiet")
    assert extract_prompt_target(prompt) == "the crowd was quiet"


def test_raw_prompt_passes_through():
    assert extract_prompt_target("just some awful words") == "just some awful words"


def test_exemplar_polarity_does_not_leak(lexicons):
    # Exemplars mention "bad"/"greatest"; only the target text must be scored.
    config = MockModelConfig("m", make_rule(lexicons, negation_aware=False))
    spec = load_task_spec("sentiment")
    prompt = build_fewshot_prompt(spec, "completely neutral words")
    scores = config.score_options(prompt, ["positive", "negative"])
    assert scores == {"positive": 0.0, "negative": 0.0}


# -- config / scoring ------------------------------------------------------------


def test_score_options_covers_requested_options(lexicons):
    config = MockModelConfig("m", make_rule(lexicons, negation_aware=False))
    scores = config.score_options("this is great", ["positive", "negative"])
    assert set(scores) == {"positive", "negative"}
    assert scores["positive"] == -scores["negative"]


def test_yes_no_options_map_to_polarity(lexicons):
    config = MockModelConfig("m", make_rule(lexicons, negation_aware=False))
    scores = config.score_options("this is great", ["Yes", "No"])
    assert scores["Yes"] > 0 > scores["No"]


def test_unknown_option_scores_zero(lexicons):
    config = MockModelConfig("m", make_rule(lexicons, negation_aware=False))
    assert config.score_options("this is great", ["maybe"]) == {"maybe": 0.0}


def test_rules_file_round_trip(tmp_path):
    rules = {
        "model_id": "custom",
        "positive_terms": ["nice"],
        "negative_terms": ["awful"],
        "negation_aware": True,
        "scale": 1.5,
        "seed": 9,
        "vocabulary": ["alpha", "beta"],
    }
    path = tmp_path / "rules.json"
    path.write_text(json.dumps(rules), encoding="utf-8")
    config = load_mock_config(path)
    assert config.model_id == "custom"
    assert config.rule.negation_aware is True
    assert config.rule.scale == 1.5
    assert set(config.complete("x", 8).split()) <= {"alpha", "beta"}


# -- planted disagreement ---------------------------------------------------------


def test_blind_and_aware_disagree_exactly_on_negated_positive_cases(lexicons):
    blind = make_rule(lexicons, negation_aware=False)
    aware = make_rule(lexicons, negation_aware=True)
    negated = load_template(FIXTURES / "templates" / "negation-pos.json")
    plain = load_template(FIXTURES / "templates" / "simple-pos.json")

    def argmax(rule, text):
        scores = lexicon_classify(rule, text)
        return max(sorted(scores), key=lambda k: scores[k])

    for case in expand(negated, lexicons):
        assert argmax(blind, case.text) != argmax(aware, case.text), case.text
    for case in expand(plain, lexicons):
        assert argmax(blind, case.text) == argmax(aware, case.text), case.text
