# Copyright 2026 The tilegene Authors
# SPDX-License-Identifier: Apache-2.0
"""Python bindings for the tilegene C++ core."""

from ._core import (
    ConfigError,
    DataError,
    FormatError,
    Model,
    adjust_pvalues,
    average_precision_at,
    bayes_accuracy,
    cli,
    default_config,
    load_checkpoint,
    pearson,
    prediction_errors,
    read_bag,
    slide_vote,
    spearman,
    synth,
    validate_bag,
    validate_dataset,
    write_bag,
)

BAG_MAGIC = b"TRNB1"

__all__ = [
    "BAG_MAGIC",
    "ConfigError",
    "DataError",
    "FormatError",
    "Model",
    "adjust_pvalues",
    "average_precision_at",
    "bayes_accuracy",
    "cli",
    "default_config",
    "load_checkpoint",
    "pearson",
    "prediction_errors",
    "read_bag",
    "slide_vote",
    "spearman",
    "synth",
    "validate_bag",
    "validate_dataset",
    "write_bag",
]
