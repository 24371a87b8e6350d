from __future__ import annotations

import shutil
from pathlib import Path

import pytest

from synthcheck.lexicon import load_lexicon_dir
from synthcheck.mock import MockModelConfig, LexiconClassifierRule
from synthcheck.mockserver import MockBackendServer

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"
GOLDEN = Path(__file__).resolve().parent / "golden"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def lexicons():
    return load_lexicon_dir(FIXTURES / "lexicons")


@pytest.fixture
def workspace(tmp_path: Path) -> Path:
    """A run-dir workspace seeded with the fixture lexicons and templates."""
    root = tmp_path / "work"
    root.mkdir()
    shutil.copytree(FIXTURES / "lexicons", root / "lexicons")
    shutil.copytree(FIXTURES / "templates", root / "templates")
    return root


def make_rule(lexicons, negation_aware: bool) -> LexiconClassifierRule:
    return LexiconClassifierRule(
        positive_terms=frozenset(lexicons["POS_ADJ"].entries) | {"nice"},
        negative_terms=frozenset(lexicons["NEG_ADJ"].entries),
        negation_aware=negation_aware,
    )


def make_mock_config(lexicons, model_id: str, negation_aware: bool, seed: int = 0) -> MockModelConfig:
    return MockModelConfig(
        model_id=model_id, rule=make_rule(lexicons, negation_aware), seed=seed
    )


@pytest.fixture
def blind_server(lexicons):
    with MockBackendServer(make_mock_config(lexicons, "mock-blind", False)) as server:
        yield server


@pytest.fixture
def aware_server(lexicons):
    with MockBackendServer(make_mock_config(lexicons, "mock-aware", True)) as server:
        yield server
