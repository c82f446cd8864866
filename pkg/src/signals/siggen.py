"""
Synthetic cardiopulmonary sources
Deterministic heart and lung sound generators, additive mixing and per-frame
ground-truth dominance labels for desk-scale verification.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal as sps

from ..exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)

PEAK_LEVEL = 0.9
# Bursts are cut once the envelope has decayed by this factor.
BURST_DYNAMIC_RANGE = 1e4


class SourceKind(str, Enum):
    """What a signal represents."""
    HEART = "heart"
    LUNG = "lung"
    OTHER = "other"


@dataclass
class SourceSignal:
    """A single mono source, amplitude in [-1, 1]."""
    samples: np.ndarray
    sample_rate: int
    kind: SourceKind = SourceKind.OTHER

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise InvalidArgumentError(f"samples must be 1-D, got shape {self.samples.shape}")
        if self.sample_rate <= 0:
            raise InvalidArgumentError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise InvalidArgumentError("samples contain non-finite values")
        if self.samples.size and np.max(np.abs(self.samples)) > 1.0:
            raise InvalidArgumentError("samples exceed the [-1, 1] amplitude range")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def __len__(self) -> int:
        return self.samples.size


@dataclass
class MixtureSignal:
    """Weighted sum of sources.

    ``component_gains`` holds the effective gain of every source after the
    optional global peak rescale; ``rescale`` is that global factor.
    """
    samples: np.ndarray
    sample_rate: int
    component_gains: List[float]
    rescale: float = 1.0

    def __len__(self) -> int:
        return self.samples.size


@dataclass
class HeartParams:
    """S1/S2 burst train parameters."""
    rate_bpm: float = 60.0
    s1_freq: float = 70.0
    s2_freq: float = 120.0
    s1_s2_interval: float = 0.3
    decay: float = 35.0
    jitter_pct: float = 0.0
    s2_amplitude: float = 0.7

    def __post_init__(self):
        if self.rate_bpm <= 0:
            raise InvalidArgumentError(f"rate_bpm must be positive, got {self.rate_bpm}")
        period = 60.0 / self.rate_bpm
        if not 0 < self.s1_s2_interval < period:
            raise InvalidArgumentError(
                f"s1_s2_interval must lie in (0, {period:g}) s, got {self.s1_s2_interval}"
            )
        if self.decay <= 0:
            raise InvalidArgumentError(f"decay must be positive, got {self.decay}")
        if not 0 <= self.jitter_pct < 50:
            raise InvalidArgumentError(f"jitter_pct must lie in [0, 50), got {self.jitter_pct}")

    @property
    def period(self) -> float:
        return 60.0 / self.rate_bpm


@dataclass
class LungParams:
    """Breathing-modulated band-limited noise parameters."""
    breaths_per_min: float = 12.0
    band_low: float = 150.0
    band_high: float = 800.0
    inhale_exhale_ratio: float = 0.5
    filter_order: int = 6

    def __post_init__(self):
        if self.breaths_per_min <= 0:
            raise InvalidArgumentError(
                f"breaths_per_min must be positive, got {self.breaths_per_min}"
            )
        if not 0 < self.band_low < self.band_high:
            raise InvalidArgumentError(
                f"need 0 < band_low < band_high, got {self.band_low}..{self.band_high}"
            )
        if self.inhale_exhale_ratio <= 0:
            raise InvalidArgumentError(
                f"inhale_exhale_ratio must be positive, got {self.inhale_exhale_ratio}"
            )


def _check_duration(duration: float, sample_rate: int) -> int:
    if duration <= 0:
        raise InvalidArgumentError(f"duration must be positive, got {duration}")
    if sample_rate <= 0:
        raise InvalidArgumentError(f"sample_rate must be positive, got {sample_rate}")
    n_samples = int(round(duration * sample_rate))
    if n_samples < 1:
        raise InvalidArgumentError(f"duration {duration} s yields no samples at {sample_rate} Hz")
    return n_samples


def _peak_normalize(samples: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(samples))
    if peak == 0:
        return samples
    return samples * (PEAK_LEVEL / peak)


def _add_burst(out: np.ndarray, onset: float, freq: float, decay: float,
               amplitude: float, sample_rate: int) -> None:
    """Add an exponentially damped sinusoid starting at ``onset`` seconds."""
    start = int(round(onset * sample_rate))
    if start >= out.size:
        return
    length = int(np.ceil(np.log(BURST_DYNAMIC_RANGE) / decay * sample_rate))
    stop = min(out.size, start + length)
    t = np.arange(stop - start) / sample_rate
    out[start:stop] += amplitude * np.exp(-decay * t) * np.sin(2 * np.pi * freq * t)


def gen_heart(params: HeartParams, duration: float, sample_rate: int, seed: int) -> SourceSignal:
    """Periodic train of S1/S2 events, each an exponentially damped sinusoid."""
    n_samples = _check_duration(duration, sample_rate)
    nyquist = sample_rate / 2
    for name, freq in (("s1_freq", params.s1_freq), ("s2_freq", params.s2_freq)):
        if not 0 < freq < nyquist:
            raise InvalidArgumentError(f"{name} {freq} Hz must lie below Nyquist {nyquist} Hz")

    rng = np.random.default_rng(seed)
    period = params.period
    jitter = params.jitter_pct / 100.0

    out = np.zeros(n_samples)
    beat = 0
    while True:
        onset = beat * period
        if jitter > 0:
            onset += rng.uniform(-jitter, jitter) * period
        onset = max(onset, 0.0)
        if onset >= duration:
            break
        _add_burst(out, onset, params.s1_freq, params.decay, 1.0, sample_rate)
        _add_burst(out, onset + params.s1_s2_interval, params.s2_freq, params.decay,
                   params.s2_amplitude, sample_rate)
        beat += 1

    logger.debug(f"Generated {beat} heart cycles over {duration} s")
    return SourceSignal(_peak_normalize(out), sample_rate, SourceKind.HEART)


def breathing_envelope(params: LungParams, n_samples: int, sample_rate: int) -> np.ndarray:
    """Half-sine inhale followed by a softer half-sine exhale, repeated."""
    cycle = 60.0 / params.breaths_per_min
    inhale = params.inhale_exhale_ratio / (1.0 + params.inhale_exhale_ratio)
    phase = np.mod(np.arange(n_samples) / sample_rate, cycle) / cycle
    return np.where(
        phase < inhale,
        np.sin(np.pi * phase / inhale),
        0.6 * np.sin(np.pi * (phase - inhale) / (1.0 - inhale)),
    )


def gen_lung(params: LungParams, duration: float, sample_rate: int, seed: int) -> SourceSignal:
    """Band-limited noise amplitude-modulated by the breathing envelope."""
    n_samples = _check_duration(duration, sample_rate)
    nyquist = sample_rate / 2
    if params.band_high >= nyquist:
        raise InvalidArgumentError(
            f"band_high {params.band_high} Hz must lie below Nyquist {nyquist} Hz"
        )

    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(n_samples)
    sos = sps.butter(params.filter_order, [params.band_low, params.band_high],
                     btype="bandpass", fs=sample_rate, output="sos")
    band = sps.sosfiltfilt(sos, noise)
    out = band * breathing_envelope(params, n_samples, sample_rate)
    return SourceSignal(_peak_normalize(out), sample_rate, SourceKind.LUNG)


def weighted_sum(sources: Sequence[SourceSignal], gains: Sequence[float]) -> np.ndarray:
    """Samplewise sum of gain-weighted sources, without any rescale."""
    if len(sources) == 0:
        raise InvalidArgumentError("mix needs at least one source")
    if len(gains) != len(sources):
        raise InvalidArgumentError(f"got {len(gains)} gains for {len(sources)} sources")
    gains = np.asarray(gains, dtype=np.float64)
    if not np.all(np.isfinite(gains)):
        raise InvalidArgumentError("gains must be finite")
    length, rate = len(sources[0]), sources[0].sample_rate
    for i, src in enumerate(sources):
        if len(src) != length:
            raise InvalidArgumentError(f"source {i} has {len(src)} samples, expected {length}")
        if src.sample_rate != rate:
            raise InvalidArgumentError(
                f"source {i} sample rate {src.sample_rate} Hz differs from {rate} Hz"
            )
    out = np.zeros(length)
    for g, src in zip(gains, sources):
        out += g * src.samples
    return out


def mix(sources: Sequence[SourceSignal], gains: Sequence[float]) -> MixtureSignal:
    """Weighted sum, rescaled by one global factor only if the peak exceeds 1."""
    samples = weighted_sum(sources, gains)
    peak = np.max(np.abs(samples)) if samples.size else 0.0
    factor = 1.0
    if peak > 1.0:
        factor = 1.0 / peak
        samples = samples * factor
        logger.info(f"Mixture peak {peak:.4f} rescaled by {factor:.6f}")
    return MixtureSignal(
        samples=samples,
        sample_rate=sources[0].sample_rate,
        component_gains=[float(g) * factor for g in gains],
        rescale=factor,
    )


def frame_count(n_samples: int, frame_len: int, hop: int) -> int:
    """Number of full frames of ``frame_len`` samples taken every ``hop`` samples."""
    if n_samples < frame_len:
        return 0
    return 1 + (n_samples - frame_len) // hop


def dominance_labels(sources: Sequence[SourceSignal], frame_len: int, hop: int) -> np.ndarray:
    """Per frame, the index of the source with the largest frame energy.

    Frame t covers samples [t*hop, t*hop + frame_len), the same grid the STFT
    uses. Ties resolve to the lowest source index.
    """
    if len(sources) == 0:
        raise InvalidArgumentError("dominance_labels needs at least one source")
    if not frame_len >= hop > 0:
        raise InvalidArgumentError(f"need frame_len >= hop > 0, got {frame_len}, {hop}")
    length = len(sources[0])
    if any(len(s) != length for s in sources):
        raise InvalidArgumentError("sources must be aligned (equal lengths)")
    if length < frame_len:
        raise InvalidArgumentError(f"sources shorter ({length}) than frame_len {frame_len}")

    energies = np.stack([
        np.sum(sliding_window_view(s.samples, frame_len)[::hop] ** 2, axis=1)
        for s in sources
    ])
    # argmax returns the first maximum, which is the tie rule.
    return np.argmax(energies, axis=0).astype(np.int64)
