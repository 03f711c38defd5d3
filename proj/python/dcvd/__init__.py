"""Dual-channel vulnerability detection and statement-level localization."""

from dcvd._core import (
    __version__,
    build_prompt,
    classification_metrics,
    composite_score,
    evaluate,
    explain_fixture,
    extract_graph,
    load_records,
    paired_t_test,
    predict,
    train,
)

__all__ = [
    "__version__",
    "build_prompt",
    "classification_metrics",
    "composite_score",
    "evaluate",
    "explain_fixture",
    "extract_graph",
    "load_records",
    "paired_t_test",
    "predict",
    "train",
]
