"""Template DSL: pattern strings with {SLOT} placeholders expanded over lexicons.

Slot names match [A-Z][A-Z0-9_]*; literal braces are escaped as `{{` and `}}`.
Expansion is the full cross product of the bound lexicons in row-major order,
with the leftmost slot (first appearance in the pattern) varying slowest.
"""
from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

from .lexicon import Lexicon

SLOT_NAME_RE = re.compile(r"[A-Z][A-Z0-9_]*\Z")


class TemplateParseError(ValueError):
    """Pattern or template file rejected; `offset` is a byte offset into the pattern."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


class BindingError(ValueError):
    """A slot has no usable lexicon binding."""


@dataclass(frozen=True)
class Literal:
    text: str


@dataclass(frozen=True)
class Slot:
    name: str


Segment = Literal | Slot


@dataclass(frozen=True)
class Template:
    name: str
    task: str
    test_type: str
    segments: tuple[Segment, ...]
    gold_label: str
    lexicon_bindings: Mapping[str, str]
    notes: str | None = None

    @property
    def pattern(self) -> str:
        return serialize_segments(self.segments)

    def slot_names(self) -> tuple[str, ...]:
        """Distinct slot names in first-appearance order."""
        seen: dict[str, None] = {}
        for seg in self.segments:
            if isinstance(seg, Slot):
                seen.setdefault(seg.name)
        return tuple(seen)


@dataclass(frozen=True)
class ExpandedCase:
    template_name: str
    text: str
    gold_label: str
    slot_values: Mapping[str, str]
    case_index: int


def _byte_offset(pattern: str, index: int) -> int:
    return len(pattern[:index].encode("utf-8"))


def parse_pattern(pattern: str) -> tuple[Segment, ...]:
    """Scan a pattern into literal and slot segments; round-trips byte-for-byte."""
    segments: list[Segment] = []
    buf: list[str] = []
    i = 0
    n = len(pattern)
    while i < n:
        ch = pattern[i]
        if ch == "{":
            if pattern[i + 1 : i + 2] == "{":
                buf.append("{")
                i += 2
                continue
            end = pattern.find("}", i + 1)
            if end < 0:
                raise TemplateParseError("unclosed brace", offset=_byte_offset(pattern, i))
            name = pattern[i + 1 : end]
            if not SLOT_NAME_RE.match(name):
                raise TemplateParseError(
                    f"invalid slot name {name!r}", offset=_byte_offset(pattern, i + 1)
                )
            if buf:
                segments.append(Literal("".join(buf)))
                buf = []
            segments.append(Slot(name))
            i = end + 1
        elif ch == "}":
            if pattern[i + 1 : i + 2] == "}":
                buf.append("}")
                i += 2
                continue
            raise TemplateParseError("unescaped '}'", offset=_byte_offset(pattern, i))
        else:
            buf.append(ch)
            i += 1
    if buf:
        segments.append(Literal("".join(buf)))
    return tuple(segments)


def serialize_segments(segments: Sequence[Segment]) -> str:
    parts: list[str] = []
    for seg in segments:
        if isinstance(seg, Slot):
            parts.append("{" + seg.name + "}")
        else:
            parts.append(seg.text.replace("{", "{{").replace("}", "}}"))
    return "".join(parts)


_REQUIRED_FIELDS = ("name", "task", "test_type", "pattern", "gold_label", "lexicons")


def parse_template(
    source: str, known_tasks: Mapping[str, Sequence[str]] | None = None
) -> Template:
    """Parse a JSON template file into a Template.

    `known_tasks` maps task ids to their label sets; when the template's task is
    present there, the gold label is checked for membership.
    """
    try:
        obj = json.loads(source)
    except json.JSONDecodeError as exc:
        raise TemplateParseError(f"template file is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise TemplateParseError("template file must be a JSON object")
    for fieldname in _REQUIRED_FIELDS:
        if fieldname not in obj:
            raise TemplateParseError(f"missing field {fieldname!r}")
    segments = parse_pattern(obj["pattern"])
    bindings = dict(obj["lexicons"])
    slot_names = [seg.name for seg in segments if isinstance(seg, Slot)]
    for name in slot_names:
        if name not in bindings:
            raise BindingError(f"slot {name!r} has no lexicon binding")
    unused = sorted(set(bindings) - set(slot_names))
    if unused:
        raise BindingError(f"bindings for absent slots: {', '.join(unused)}")
    gold = obj["gold_label"]
    if known_tasks is not None and obj["task"] in known_tasks:
        labels = list(known_tasks[obj["task"]])
        if gold not in labels:
            raise TemplateParseError(
                f"gold label {gold!r} not in label set {labels} of task {obj['task']!r}"
            )
    return Template(
        name=obj["name"],
        task=obj["task"],
        test_type=obj["test_type"],
        segments=segments,
        gold_label=gold,
        lexicon_bindings=bindings,
        notes=obj.get("notes"),
    )


def template_to_json(template: Template) -> dict:
    obj = {
        "name": template.name,
        "task": template.task,
        "test_type": template.test_type,
        "pattern": template.pattern,
        "gold_label": template.gold_label,
        "lexicons": dict(template.lexicon_bindings),
    }
    if template.notes is not None:
        obj["notes"] = template.notes
    return obj


def load_template(path: str | Path, known_tasks: Mapping[str, Sequence[str]] | None = None) -> Template:
    return parse_template(Path(path).read_text(encoding="utf-8"), known_tasks)


def save_template(template: Template, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(template_to_json(template), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def _bound_lexicons(template: Template, lexicons: Mapping[str, Lexicon]) -> list[tuple[str, Lexicon]]:
    bound: list[tuple[str, Lexicon]] = []
    for slot in template.slot_names():
        lex_name = template.lexicon_bindings[slot]
        lexicon = lexicons.get(lex_name)
        if lexicon is None:
            raise BindingError(f"slot {slot!r}: lexicon {lex_name!r} not found")
        if len(lexicon) == 0:
            raise BindingError(f"slot {slot!r}: lexicon {lex_name!r} is empty")
        bound.append((slot, lexicon))
    return bound


def expansion_count(template: Template, lexicons: Mapping[str, Lexicon]) -> int:
    """Number of cases expand() would produce, without materializing them."""
    count = 1
    for _, lexicon in _bound_lexicons(template, lexicons):
        count *= len(lexicon)
    return count


def iter_expand(template: Template, lexicons: Mapping[str, Lexicon]) -> Iterator[ExpandedCase]:
    """Yield the cross product of bound lexicons in row-major order."""
    bound = _bound_lexicons(template, lexicons)
    slots = [slot for slot, _ in bound]
    for index, values in enumerate(itertools.product(*(lex.entries for _, lex in bound))):
        chosen = dict(zip(slots, values))
        parts = [
            chosen[seg.name] if isinstance(seg, Slot) else seg.text
            for seg in template.segments
        ]
        yield ExpandedCase(
            template_name=template.name,
            text="".join(parts),
            gold_label=template.gold_label,
            slot_values=chosen,
            case_index=index,
        )


def expand(template: Template, lexicons: Mapping[str, Lexicon]) -> list[ExpandedCase]:
    return list(iter_expand(template, lexicons))
