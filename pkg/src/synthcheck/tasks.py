"""Task specifications and few-shot prompt construction.

The built-in sentiment and toxicity specs (including exemplars, option strings
and the exact prompt formats) are frozen as versioned JSON files under
`synthcheck/prompts/`; prompt rendering is plain `{text}`/`{answer}`
substitution so results cannot drift.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

BUILTIN_TASKS = ("sentiment", "toxicity")


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    label_set: tuple[str, str]
    option_strings: Mapping[str, str]
    fewshot_exemplars: tuple[tuple[str, str], ...]
    prompt_style: str
    instruction: str
    exemplar_template: str
    target_template: str

    def __post_init__(self):
        if len(self.label_set) != 2 or len(set(self.label_set)) != 2:
            raise ValueError("label_set must hold exactly 2 distinct labels (binary tasks only)")
        missing = [label for label in self.label_set if label not in self.option_strings]
        if missing:
            raise ValueError(f"option_strings missing labels: {missing}")
        for text, label in self.fewshot_exemplars:
            if label not in self.label_set:
                raise ValueError(f"exemplar label {label!r} outside label set")
            if not text:
                raise ValueError("exemplar text must be non-empty")

    def with_exemplars(self, exemplars: tuple[tuple[str, str], ...]) -> "TaskSpec":
        return TaskSpec(
            task_id=self.task_id,
            label_set=self.label_set,
            option_strings=self.option_strings,
            fewshot_exemplars=exemplars,
            prompt_style=self.prompt_style,
            instruction=self.instruction,
            exemplar_template=self.exemplar_template,
            target_template=self.target_template,
        )


def _spec_from_obj(obj: dict) -> TaskSpec:
    return TaskSpec(
        task_id=obj["task_id"],
        label_set=tuple(obj["labels"]),
        option_strings=dict(obj["options"]),
        fewshot_exemplars=tuple((text, label) for text, label in obj["exemplars"]),
        prompt_style=obj.get("style", "custom"),
        instruction=obj.get("instruction", ""),
        exemplar_template=obj["exemplar_template"],
        target_template=obj["target_template"],
    )


def load_task_spec(name_or_path: str | Path) -> TaskSpec:
    """Load a built-in task by id, or a custom spec from a JSON file path."""
    name = str(name_or_path)
    if name in BUILTIN_TASKS:
        data = resources.files("synthcheck").joinpath(f"prompts/{name}.json").read_text("utf-8")
        return _spec_from_obj(json.loads(data))
    path = Path(name_or_path)
    if not path.exists():
        raise ValueError(f"unknown task {name!r}; built-ins are {BUILTIN_TASKS}")
    return _spec_from_obj(json.loads(path.read_text(encoding="utf-8")))


def known_label_sets() -> dict[str, tuple[str, str]]:
    return {task: load_task_spec(task).label_set for task in BUILTIN_TASKS}


def _render(template: str, text: str, answer: str | None = None) -> str:
    out = template.replace("{text}", text)
    if answer is not None:
        out = out.replace("{answer}", answer)
    return out


def build_fewshot_prompt(spec: TaskSpec, text: str) -> str:
    """Render the few-shot prompt: instruction, exemplars in order, then the target."""
    if not text:
        raise ValueError("text must be non-empty")
    parts = [spec.instruction]
    for exemplar_text, exemplar_label in spec.fewshot_exemplars:
        answer = spec.option_strings[exemplar_label]
        parts.append(_render(spec.exemplar_template, exemplar_text, answer))
    parts.append(_render(spec.target_template, text))
    return "".join(parts)
