"""
Time-frequency analysis and synthesis
Hann-windowed STFT, weighted overlap-add inverse, log-magnitude features and
per-bin feature normalization.
"""

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal as sps

from ..exceptions import InvalidArgumentError, NumericError
from ..signals.siggen import MixtureSignal, SourceSignal

logger = logging.getLogger(__name__)

STD_FLOOR = 1e-6
# Samples whose summed squared window falls below this are not recoverable.
WINDOW_SUM_FLOOR = 1e-10

Signal = Union[SourceSignal, MixtureSignal, np.ndarray]


@dataclass
class ComplexSpectrogram:
    """One-sided STFT; ``bins`` has shape (n_fft // 2 + 1, frames)."""
    bins: np.ndarray
    n_fft: int
    hop: int
    sample_rate: int
    window: str = "hann"

    def __post_init__(self):
        if self.bins.ndim != 2 or self.bins.shape[0] != self.n_fft // 2 + 1:
            raise InvalidArgumentError(
                f"bins shape {self.bins.shape} does not match n_fft {self.n_fft}"
            )
        if not 0 < self.hop <= self.n_fft:
            raise InvalidArgumentError(f"hop {self.hop} must lie in (0, {self.n_fft}]")

    @property
    def n_frames(self) -> int:
        return self.bins.shape[1]

    @property
    def n_bins(self) -> int:
        return self.bins.shape[0]

    @property
    def signal_length(self) -> int:
        return (self.n_frames - 1) * self.hop + self.n_fft

    def with_bins(self, bins: np.ndarray) -> "ComplexSpectrogram":
        return ComplexSpectrogram(bins, self.n_fft, self.hop, self.sample_rate, self.window)


@dataclass
class FeatureStats:
    """Per-bin mean and (floored) standard deviation of a feature set."""
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise InvalidArgumentError("mean and std must be 1-D vectors of equal length")
        if np.any(self.std <= 0):
            raise InvalidArgumentError("std must be positive elementwise")

    @property
    def dim(self) -> int:
        return self.mean.size


def hann_window(n_fft: int) -> np.ndarray:
    """Periodic Hann window, the variant that overlap-adds to a constant."""
    return sps.get_window("hann", n_fft, fftbins=True)


def _samples(sig: Signal) -> np.ndarray:
    if isinstance(sig, (SourceSignal, MixtureSignal)):
        return np.asarray(sig.samples, dtype=np.float64)
    return np.asarray(sig, dtype=np.float64)


def _sample_rate(sig: Signal, default: int) -> int:
    return getattr(sig, "sample_rate", default)


def check_cola(n_fft: int, hop: int) -> None:
    """Reject hops whose squared Hann windows do not overlap-add to a constant."""
    if not 0 < hop <= n_fft:
        raise InvalidArgumentError(f"hop {hop} must lie in (0, {n_fft}]")
    if n_fft % hop != 0:
        raise InvalidArgumentError(f"hop {hop} does not divide n_fft {n_fft}; not COLA")
    w2 = hann_window(n_fft) ** 2
    overlap = w2.reshape(-1, hop).sum(axis=0)
    if np.ptp(overlap) > 1e-10 * np.max(overlap):
        raise InvalidArgumentError(
            f"hop {hop} is not constant-overlap-add for a {n_fft}-point Hann window"
        )


def stft(sig: Signal, n_fft: int = 256, hop: int = 64, sample_rate: int = 4000) -> ComplexSpectrogram:
    """Hann-windowed one-sided STFT; frame t covers samples [t*hop, t*hop + n_fft)."""
    if n_fft < 2 or n_fft & (n_fft - 1):
        raise InvalidArgumentError(f"n_fft must be a power of two, got {n_fft}")
    if not 0 < hop <= n_fft:
        raise InvalidArgumentError(f"hop {hop} must lie in (0, {n_fft}]")
    x = _samples(sig)
    if x.size < n_fft:
        raise InvalidArgumentError(f"signal of {x.size} samples is shorter than n_fft {n_fft}")

    frames = sliding_window_view(x, n_fft)[::hop] * hann_window(n_fft)
    bins = np.fft.rfft(frames, axis=1).T
    return ComplexSpectrogram(bins, n_fft, hop, _sample_rate(sig, sample_rate))


def istft(spec: ComplexSpectrogram) -> np.ndarray:
    """Weighted overlap-add synthesis, normalized by the summed squared window."""
    check_cola(spec.n_fft, spec.hop)
    if not np.all(np.isfinite(spec.bins)):
        raise NumericError("spectrogram contains non-finite bins")

    window = hann_window(spec.n_fft)
    frames = np.fft.irfft(spec.bins.T, n=spec.n_fft, axis=1) * window
    length = spec.signal_length

    out = np.zeros(length)
    norm = np.zeros(length)
    w2 = window ** 2
    for t in range(spec.n_frames):
        start = t * spec.hop
        out[start:start + spec.n_fft] += frames[t]
        norm[start:start + spec.n_fft] += w2

    valid = norm > WINDOW_SUM_FLOOR
    out[valid] /= norm[valid]
    out[~valid] = 0.0
    return out


def log_mag(spec: ComplexSpectrogram, floor: float = 1e-5) -> np.ndarray:
    """Log-magnitude features, one row per frame: ln(max(|bin|, floor))."""
    if floor <= 0:
        raise InvalidArgumentError(f"floor must be positive, got {floor}")
    return np.log(np.maximum(np.abs(spec.bins), floor)).T.copy()


def fit_stats(frames: np.ndarray) -> FeatureStats:
    """Per-bin mean and population std with the std floored at 1e-6."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] < 2:
        raise InvalidArgumentError(
            f"fit_stats needs at least 2 frames, got shape {frames.shape}"
        )
    mean = frames.mean(axis=0)
    std = np.maximum(frames.std(axis=0), STD_FLOOR)
    return FeatureStats(mean=mean, std=std)


def _check_dim(frames: np.ndarray, stats: FeatureStats) -> None:
    if frames.shape[-1] != stats.dim:
        raise InvalidArgumentError(
            f"feature dimension {frames.shape[-1]} does not match stats dimension {stats.dim}"
        )


def normalize(frames: np.ndarray, stats: FeatureStats) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    _check_dim(frames, stats)
    return (frames - stats.mean) / stats.std


def denormalize(frames: np.ndarray, stats: FeatureStats) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    _check_dim(frames, stats)
    return frames * stats.std + stats.mean


def magnitude_db(spec: ComplexSpectrogram, floor: float = 1e-5) -> np.ndarray:
    """20*log10 magnitude with a linear floor, shape (bins, frames)."""
    return 20.0 * np.log10(np.maximum(np.abs(spec.bins), floor))
