# Copyright (C) 2026 The actflow authors
# SPDX-License-Identifier: Apache-2.0
"""Conditional flow matching over stored activations: training, editing, classification and direction analysis."""

from ._actflow import (
    Corpus,
    Model,
    auc,
    caa_direction,
    classify,
    edit,
    generate,
    repe_direction,
    synth,
    train,
)

__all__ = [
    "Corpus",
    "Model",
    "auc",
    "caa_direction",
    "classify",
    "edit",
    "generate",
    "repe_direction",
    "synth",
    "train",
]
