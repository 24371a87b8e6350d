from __future__ import annotations

import json

import pytest
from hypothesis import given, settings, strategies as st

from synthcheck.predict import PredictionError
from synthcheck.tasks import load_task_spec
from synthcheck.template import expand, load_template
from synthcheck.verify import (
    CaseResult,
    TemplateResult,
    VerificationAborted,
    evaluate_template,
    per_slot_accuracy,
    render_report,
    result_from_record,
    result_to_record,
)

from conftest import FIXTURES, make_mock_config


class LocalBackend:
    def __init__(self, config):
        self._config = config
        self.model_id = config.model_id

    def score_options(self, prompt, options):
        return self._config.score_options(prompt, options)


def make_result(n_cases: int, n_correct: int, name="t", model="m") -> TemplateResult:
    cases = tuple(
        CaseResult(i, "positive" if i < n_correct else "negative", i < n_correct,
                   {"positive": 0.9, "negative": 0.1})
        for i in range(n_cases)
    )
    return TemplateResult(name, model, "Test", "positive", cases)


# -- accuracy arithmetic ---------------------------------------------------------


def test_reported_failure_arithmetic():
    # 4814 cases with 3731 incorrect leaves 1083 correct.
    result = make_result(4814, 4814 - 3731)
    assert result.n_correct == 1083
    assert result.accuracy_pct == pytest.approx(22.50, abs=0.01)
    assert f"{result.accuracy_pct:.2f}" == "22.50"


def test_all_correct_is_100():
    assert make_result(7, 7).accuracy_pct == 100.0


def test_accuracy_bounds_and_consistency():
    result = make_result(10, 4)
    assert 0.0 <= result.accuracy_pct <= 100.0
    assert result.n_correct <= result.n_cases
    assert result.accuracy_pct == 100.0 * result.n_correct / result.n_cases


# -- evaluate_template -----------------------------------------------------------


def test_negation_blind_mock_fails_negated_positive_template(lexicons):
    template = load_template(FIXTURES / "templates" / "negation-pos.json")
    cases = expand(template, lexicons)
    backend = LocalBackend(make_mock_config(lexicons, "blind", negation_aware=False))
    result = evaluate_template(cases, backend, load_task_spec("sentiment"),
                               test_type=template.test_type)
    assert result.n_cases == 2988
    assert result.accuracy_pct == 0.0


def test_negation_blind_mock_passes_plain_positive_template(lexicons):
    template = load_template(FIXTURES / "templates" / "simple-pos.json")
    cases = expand(template, lexicons)
    backend = LocalBackend(make_mock_config(lexicons, "blind", negation_aware=False))
    result = evaluate_template(cases, backend, load_task_spec("sentiment"))
    assert result.accuracy_pct == 100.0


def test_empty_cases_rejected(lexicons):
    backend = LocalBackend(make_mock_config(lexicons, "m", False))
    with pytest.raises(ValueError):
        evaluate_template([], backend, load_task_spec("sentiment"))


def test_mixed_templates_rejected(lexicons):
    t1 = expand(load_template(FIXTURES / "templates" / "simple-pos.json"), lexicons)
    t2 = expand(load_template(FIXTURES / "templates" / "simple-neg.json"), lexicons)
    backend = LocalBackend(make_mock_config(lexicons, "m", False))
    with pytest.raises(ValueError):
        evaluate_template([t1[0], t2[0]], backend, load_task_spec("sentiment"))


def test_case_failures_above_threshold_abort_with_partial(lexicons):
    template = load_template(FIXTURES / "templates" / "simple-pos.json")
    cases = expand(template, lexicons)[:50]

    # Cases run row-major, so failures planted on the last two adjectives of
    # the first noun leave completed work behind before the abort.
    triggers = ("book is exemplary.", "book is outstanding.")

    class Flaky(LocalBackend):
        def score_options(self, prompt, options):
            if any(t in prompt for t in triggers):
                raise RuntimeError("planted")
            return super().score_options(prompt, options)

    backend = Flaky(make_mock_config(lexicons, "flaky", False))
    with pytest.raises(VerificationAborted) as excinfo:
        evaluate_template(cases, backend, load_task_spec("sentiment"),
                          max_failure_rate=0.02, max_workers=1)
    assert excinfo.value.partial.n_cases > 0
    assert excinfo.value.errors


def test_progress_callback_sees_every_case(lexicons):
    template = load_template(FIXTURES / "templates" / "simple-pos.json")
    cases = expand(template, lexicons)[:10]
    backend = LocalBackend(make_mock_config(lexicons, "m", False))
    seen = []
    evaluate_template(cases, backend, load_task_spec("sentiment"),
                      on_progress=lambda done, total: seen.append((done, total)))
    assert seen[-1] == (10, 10)


def test_determinism(lexicons):
    template = load_template(FIXTURES / "templates" / "negation-neg.json")
    cases = expand(template, lexicons)[:100]
    backend = LocalBackend(make_mock_config(lexicons, "m", False))
    spec = load_task_spec("sentiment")
    a = evaluate_template(cases, backend, spec)
    b = evaluate_template(cases, backend, spec)
    assert result_to_record(a) == result_to_record(b)


# -- per-slot accuracy ------------------------------------------------------------


def test_per_slot_groups_partition_cases(lexicons):
    template = load_template(FIXTURES / "templates" / "negation-pos.json")
    cases = expand(template, lexicons)
    backend = LocalBackend(make_mock_config(lexicons, "m", False))
    result = evaluate_template(cases, backend, load_task_spec("sentiment"))
    for slot in ("NOUN", "POS_ADJ"):
        rows = per_slot_accuracy(result, cases, slot)
        assert sum(n for _, n, _ in rows) == result.n_cases
        lexemes = [lexeme for lexeme, _, _ in rows]
        assert len(lexemes) == len(set(lexemes))
        accuracies = [acc for _, _, acc in rows]
        assert accuracies == sorted(accuracies, reverse=True)


def test_per_slot_group_arithmetic():
    cases_expanded = expand(
        load_template(FIXTURES / "templates" / "simple-pos.json"),
        {"NOUN": __import__("synthcheck").Lexicon("NOUN", ("book",)),
         "POS_ADJ": __import__("synthcheck").Lexicon("POS_ADJ", ("nice", "great", "super", "perfect"))},
    )
    case_results = tuple(
        CaseResult(i, "positive" if i < 2 else "negative", i < 2, {})
        for i in range(4)
    )
    result = TemplateResult("simple-pos", "m", "Plain", "positive", case_results)
    rows = per_slot_accuracy(result, cases_expanded, "NOUN")
    assert rows == [("book", 4, 50.0)]


def test_single_lexeme_slot_matches_overall_accuracy(lexicons):
    template = load_template(FIXTURES / "templates" / "stereotype-directive.json")
    cases = expand(template, lexicons)
    result = TemplateResult(
        template.name, "m", template.test_type, template.gold_label,
        tuple(CaseResult(c.case_index, "toxic", True, {}) for c in cases),
    )
    rows = per_slot_accuracy(result, cases, "DESERVE_TERM")
    assert rows == [("deserve to", len(cases), result.accuracy_pct)]


def test_unknown_slot_rejected(lexicons):
    template = load_template(FIXTURES / "templates" / "simple-pos.json")
    cases = expand(template, lexicons)
    result = make_result(3, 3)
    with pytest.raises(ValueError):
        per_slot_accuracy(result, cases, "VERB")


# -- reports -----------------------------------------------------------------------


def test_markdown_one_row_two_model_columns():
    results = [make_result(10, 5, model="model-a"), make_result(10, 7, model="model-b")]
    doc = render_report(results, "markdown")
    rows = [line for line in doc.splitlines() if line.startswith("| Test")
            or line.startswith("| ---") or "| t |" in line]
    assert "model-a (%)" in doc and "model-b (%)" in doc
    data_rows = [line for line in doc.splitlines()[2:] if line.strip()]
    assert len(data_rows) == 1
    assert "50.00" in data_rows[0] and "70.00" in data_rows[0]


def test_empty_results_render_header_only():
    doc = render_report([], "markdown")
    assert len([line for line in doc.splitlines() if line.strip()]) == 2
    assert render_report([], "csv").splitlines()[0].startswith("test_type,")
    assert json.loads(render_report([], "json")) == []


def test_json_report_round_trips():
    result = make_result(12, 9)
    doc = render_report([result], "json")
    loaded = [result_from_record(record) for record in json.loads(doc)]
    assert loaded == [result]


def test_csv_carries_full_precision():
    result = make_result(4814, 1083)
    doc = render_report([result], "csv")
    assert repr(result.accuracy_pct) in doc


def test_unknown_format_rejected():
    with pytest.raises(ValueError):
        render_report([], "xml")


# -- record round trip -------------------------------------------------------------


@settings(max_examples=25)
@given(st.integers(1, 40), st.data())
def test_result_record_round_trip(n_cases, data):
    n_correct = data.draw(st.integers(0, n_cases))
    result = make_result(n_cases, n_correct)
    assert result_from_record(result_to_record(result)) == result
