"""Behavioral-testing workbench for binary text classifiers.

Pipeline: seed queries from a corpus, generate a synthetic test set through a
model backend, rank examples by task-vs-reference disagreement, analyze the
hard subset, and verify templated failure hypotheses.
"""

__version__ = "0.1.0"

from .backend import BackendDescriptor, GenerationConfig, HttpBackend
from .divergence import DivergenceRecord, divergence_score, rank_hard_subset
from .lexicon import Lexicon, load_lexicon, load_lexicon_dir, validate_lexicon
from .ngrams import NgramStat, cluster_by_ngram, ngram_counts
from .perturb import apply_affix, nonsense_string, typo_variants
from .predict import Prediction, normalize_option_scores, predict_label_distribution
from .queries import Query, sample_queries
from .segment import extract_first_sentence
from .tasks import TaskSpec, build_fewshot_prompt, load_task_spec
from .template import (
    ExpandedCase,
    Template,
    expand,
    expansion_count,
    parse_pattern,
    parse_template,
)
from .verify import TemplateResult, evaluate_template, per_slot_accuracy, render_report

__all__ = [
    "BackendDescriptor",
    "DivergenceRecord",
    "ExpandedCase",
    "GenerationConfig",
    "HttpBackend",
    "Lexicon",
    "NgramStat",
    "Prediction",
    "Query",
    "TaskSpec",
    "Template",
    "TemplateResult",
    "apply_affix",
    "build_fewshot_prompt",
    "cluster_by_ngram",
    "divergence_score",
    "evaluate_template",
    "expand",
    "expansion_count",
    "extract_first_sentence",
    "load_lexicon",
    "load_lexicon_dir",
    "load_task_spec",
    "ngram_counts",
    "nonsense_string",
    "normalize_option_scores",
    "parse_pattern",
    "parse_template",
    "per_slot_accuracy",
    "predict_label_distribution",
    "rank_hard_subset",
    "render_report",
    "sample_queries",
    "typo_variants",
    "validate_lexicon",
]
