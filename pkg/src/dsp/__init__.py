"""STFT analysis/synthesis and spectrogram features."""

from .spectral import (
    ComplexSpectrogram,
    FeatureStats,
    check_cola,
    denormalize,
    fit_stats,
    hann_window,
    istft,
    log_mag,
    magnitude_db,
    normalize,
    stft,
)

__all__ = [
    "ComplexSpectrogram",
    "FeatureStats",
    "check_cola",
    "denormalize",
    "fit_stats",
    "hann_window",
    "istft",
    "log_mag",
    "magnitude_db",
    "normalize",
    "stft",
]
