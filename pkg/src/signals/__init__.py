"""Synthetic heart/lung sources, mixing and ground-truth labels."""

from .siggen import (
    HeartParams,
    LungParams,
    MixtureSignal,
    SourceKind,
    SourceSignal,
    dominance_labels,
    gen_heart,
    gen_lung,
    mix,
    weighted_sum,
)

__all__ = [
    "HeartParams",
    "LungParams",
    "MixtureSignal",
    "SourceKind",
    "SourceSignal",
    "dominance_labels",
    "gen_heart",
    "gen_lung",
    "mix",
    "weighted_sum",
]
