from __future__ import annotations

import json

from hypothesis import given, strategies as st

from synthcheck.segment import extract_first_sentence

from conftest import FIXTURES


def load_oracle_cases():
    return json.loads((FIXTURES / "segmentation" / "cases_50.json").read_text(encoding="utf-8"))


def test_oracle_fixture_has_50_cases():
    assert len(load_oracle_cases()) == 50


def test_hand_checked_oracle_cases():
    failures = []
    for case in load_oracle_cases():
        got = extract_first_sentence(case["text"])
        if got != case["expected"]:
            failures.append((case["text"], got, case["expected"]))
    assert not failures, failures


def test_single_terminator():
    assert extract_first_sentence("Great movie. I loved it.") == "Great movie."


def test_no_terminator_returns_whole_input():
    assert extract_first_sentence("no terminator here") == "no terminator here"


def test_abbreviation_suppresses_split():
    assert extract_first_sentence("Mr. Smith arrived. Then left.") == "Mr. Smith arrived."


@given(st.text(max_size=200))
def test_total_function_returns_prefix(text):
    result = extract_first_sentence(text)
    assert text.startswith(result)
    assert result == text or result[-1] in ".!?"
