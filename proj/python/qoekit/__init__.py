"""Python bindings for the QoE toolkit."""

from ._core import (
    QoeError,
    kendall,
    pca,
    pearson,
    predict,
    process,
    run_cli,
    schedule_emission,
    spearman,
    synth_records,
    tokenize,
    train,
)

__all__ = [
    "QoeError",
    "kendall",
    "pca",
    "pearson",
    "predict",
    "process",
    "run_cli",
    "schedule_emission",
    "spearman",
    "synth_records",
    "tokenize",
    "train",
]
