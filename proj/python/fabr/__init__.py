"""Random-feature ridge classification with a one-pass multi-shrinkage solver."""

from ._core import (
    DataError,
    DomainError,
    FeaturePlan,
    FormatError,
    IoError,
    MemoryBudgetError,
    Model,
    NumericError,
    accuracy,
    fit,
    load_model,
    run_cli,
    set_num_threads,
    synth,
    voc,
)

__all__ = [
    "DataError",
    "DomainError",
    "FeaturePlan",
    "FormatError",
    "IoError",
    "MemoryBudgetError",
    "Model",
    "NumericError",
    "accuracy",
    "fit",
    "load_model",
    "run_cli",
    "set_num_threads",
    "synth",
    "voc",
]
