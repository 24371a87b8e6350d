"""Lexicon files: named substitution lists that fill template slots.

File format: UTF-8 text, one entry per line, surrounding whitespace trimmed,
blank lines and lines starting with `#` ignored. The lexicon name is the
filename stem and must match [A-Z][A-Z0-9_]*.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

LEXICON_NAME_RE = re.compile(r"[A-Z][A-Z0-9_]*\Z")
LEXICON_SUFFIX = ".lex"


class LexiconError(ValueError):
    """Raised for an invalid lexicon file; carries per-line problems."""

    def __init__(self, name: str, problems: list[tuple[int, str]]):
        self.name = name
        self.problems = list(problems)
        detail = "; ".join(f"line {line}: {msg}" for line, msg in self.problems)
        super().__init__(f"lexicon {name!r}: {detail}")


@dataclass(frozen=True)
class Lexicon:
    name: str
    entries: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class LexiconReport:
    """Outcome of validating one lexicon file."""

    name: str
    lexicon: Lexicon | None
    problems: list[tuple[int, str]]

    @property
    def ok(self) -> bool:
        return self.lexicon is not None


def validate_lexicon(text: str, name: str) -> LexiconReport:
    """Parse lexicon file text, reporting every problem with its line number."""
    problems: list[tuple[int, str]] = []
    if not LEXICON_NAME_RE.match(name):
        problems.append((0, f"invalid lexicon name {name!r}"))
    entries: list[str] = []
    first_seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        entry = raw.strip()
        if not entry or entry.startswith("#"):
            continue
        if entry in first_seen:
            problems.append(
                (lineno, f"duplicate entry {entry!r} (first at line {first_seen[entry]})")
            )
            continue
        first_seen[entry] = lineno
        entries.append(entry)
    if not entries:
        problems.append((0, "no entries"))
    lexicon = Lexicon(name, tuple(entries)) if not problems else None
    return LexiconReport(name, lexicon, problems)


def load_lexicon(path: str | Path) -> Lexicon:
    """Load one .lex file; raises LexiconError on any validation problem."""
    path = Path(path)
    report = validate_lexicon(path.read_text(encoding="utf-8"), path.stem)
    if not report.ok:
        raise LexiconError(report.name, report.problems)
    assert report.lexicon is not None
    return report.lexicon


def load_lexicon_dir(directory: str | Path) -> dict[str, Lexicon]:
    """Load every .lex file in a directory, keyed by lexicon name."""
    out: dict[str, Lexicon] = {}
    for path in sorted(Path(directory).glob(f"*{LEXICON_SUFFIX}")):
        lexicon = load_lexicon(path)
        out[lexicon.name] = lexicon
    return out


def dump_lexicon(lexicon: Lexicon) -> str:
    """Serialize entries back to the .lex file format."""
    return "\n".join(lexicon.entries) + "\n"


def save_lexicon(lexicon: Lexicon, directory: str | Path) -> Path:
    path = Path(directory) / f"{lexicon.name}{LEXICON_SUFFIX}"
    path.write_text(dump_lexicon(lexicon), encoding="utf-8")
    return path
