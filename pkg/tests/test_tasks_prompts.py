from __future__ import annotations

import pytest

from synthcheck.tasks import TaskSpec, build_fewshot_prompt, load_task_spec

from conftest import GOLDEN


def test_sentiment_prompt_matches_golden_bytes():
    spec = load_task_spec("sentiment")
    golden = (GOLDEN / "sentiment_prompt.txt").read_text(encoding="utf-8")
    text = "a smile on your face"
    assert build_fewshot_prompt(spec, text) == golden.replace("{text}", text)


def test_toxicity_prompt_matches_golden_bytes():
    spec = load_task_spec("toxicity")
    golden = (GOLDEN / "toxicity_prompt.txt").read_text(encoding="utf-8")
    text = "the committee met on tuesday"
    assert build_fewshot_prompt(spec, text) == golden.replace("{text}", text)


def test_sentiment_target_block_shape():
    spec = load_task_spec("sentiment")
    prompt = build_fewshot_prompt(spec, "a smile on your face")
    assert prompt.endswith(
        "Question: Find the sentiment of this text. "
        "Answer with positive or negative: a smile on your face\n\nAnswer:"
    )


def test_toxicity_instruction_anchor():
    spec = load_task_spec("toxicity")
    prompt = build_fewshot_prompt(spec, "anything")
    assert prompt.startswith("Determine if the following text includes hate speech")


def test_default_specs_are_four_shot():
    assert len(load_task_spec("sentiment").fewshot_exemplars) == 4
    assert len(load_task_spec("toxicity").fewshot_exemplars) == 4


def test_zero_exemplars_instruction_plus_target_only():
    spec = load_task_spec("toxicity").with_exemplars(())
    prompt = build_fewshot_prompt(spec, "plain text")
    assert prompt == spec.instruction + 'Text: "plain text"\n\nAnswer:'


def test_prompt_determinism():
    spec = load_task_spec("sentiment")
    assert build_fewshot_prompt(spec, "same text") == build_fewshot_prompt(spec, "same text")


def test_empty_text_rejected():
    with pytest.raises(ValueError):
        build_fewshot_prompt(load_task_spec("sentiment"), "")


def test_binary_label_set_enforced():
    with pytest.raises(ValueError):
        TaskSpec(
            task_id="x", label_set=("a", "b", "c"), option_strings={},
            fewshot_exemplars=(), prompt_style="custom", instruction="",
            exemplar_template="", target_template="",
        )
    with pytest.raises(ValueError):
        TaskSpec(
            task_id="x", label_set=("a", "a"), option_strings={"a": "A"},
            fewshot_exemplars=(), prompt_style="custom", instruction="",
            exemplar_template="", target_template="",
        )


def test_option_strings_must_cover_labels():
    with pytest.raises(ValueError):
        TaskSpec(
            task_id="x", label_set=("a", "b"), option_strings={"a": "A"},
            fewshot_exemplars=(), prompt_style="custom", instruction="",
            exemplar_template="", target_template="",
        )


def test_unknown_task_rejected():
    with pytest.raises(ValueError):
        load_task_spec("no-such-task")


def test_custom_spec_loads_from_file(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(
        '{"task_id": "topic", "labels": ["sports", "politics"],'
        ' "options": {"sports": "S", "politics": "P"}, "exemplars": [],'
        ' "exemplar_template": "{text} -> {answer}\\n", "target_template": "{text} ->"}',
        encoding="utf-8",
    )
    spec = load_task_spec(path)
    assert spec.label_set == ("sports", "politics")
    assert build_fewshot_prompt(spec, "game tonight") == "game tonight ->"
