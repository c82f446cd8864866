"""
Latent-region separation
Frames are clustered by their posterior means; each cluster becomes one source,
rebuilt either by gating mixture frames (hard) or by Wiener-style masks built
from the decoded cluster centroids (wiener). Both reuse the mixture phase.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

import numpy as np

from ..dsp.spectral import ComplexSpectrogram, FeatureStats, denormalize, istft
from ..exceptions import InvalidArgumentError
from ..latent.clustering import Clustering, kmeans
from ..vae.model import VAEModel, decode, encode

logger = logging.getLogger(__name__)

MASK_DENOMINATOR_FLOOR = 1e-12


class AssignmentMode(str, Enum):
    HARD = "hard"
    WIENER = "wiener"


@dataclass
class FrameAssignment:
    ids: np.ndarray
    cluster_count: int
    mode: AssignmentMode = AssignmentMode.WIENER
    centroids: Optional[np.ndarray] = None

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.mode = AssignmentMode(self.mode)
        if self.cluster_count < 1:
            raise InvalidArgumentError(f"cluster_count must be >= 1, got {self.cluster_count}")
        if self.ids.size and (self.ids.min() < 0 or self.ids.max() >= self.cluster_count):
            raise InvalidArgumentError(f"frame ids must lie in [0, {self.cluster_count})")

    def __len__(self) -> int:
        return self.ids.size


@dataclass
class SeparatedSources:
    signals: List[np.ndarray]
    sample_rate: int
    masks: Optional[np.ndarray] = None
    provenance: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        lengths = {s.size for s in self.signals}
        if len(lengths) > 1:
            raise InvalidArgumentError(f"separated sources differ in length: {sorted(lengths)}")

    @property
    def n_sources(self) -> int:
        return len(self.signals)


def assign_frames(model: VAEModel, frames: np.ndarray, c: int = 2, seed: int = 0,
                  restarts: int = 10, mode: AssignmentMode = AssignmentMode.WIENER) -> FrameAssignment:
    """Encode every frame, cluster the posterior means, return per-frame ids."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] != model.input_dim:
        raise InvalidArgumentError(
            f"feature frames have {frames.shape[-1]} bins but the model expects {model.input_dim}"
        )
    if c < 1:
        raise InvalidArgumentError(f"cluster count must be >= 1, got {c}")
    means = encode(model, frames).mu
    clustering: Clustering = kmeans(means, c, restarts=restarts, seed=seed)
    logger.info(
        f"Assigned {frames.shape[0]} frames to {c} clusters "
        f"(sizes {np.bincount(clustering.assignments, minlength=c).tolist()})"
    )
    return FrameAssignment(clustering.assignments, c, mode, clustering.centroids)


def hard_masks(assignment: FrameAssignment, n_bins: int) -> np.ndarray:
    """Binary frame gates, shape (c, bins, frames)."""
    c = assignment.cluster_count
    gates = (assignment.ids[np.newaxis, :] == np.arange(c)[:, np.newaxis]).astype(np.float64)
    return np.repeat(gates[:, np.newaxis, :], n_bins, axis=1)


def centroid_magnitudes(model: VAEModel, centroids: np.ndarray, stats: FeatureStats) -> np.ndarray:
    """Linear magnitudes decoded from each latent centroid, shape (c, bins)."""
    return np.exp(denormalize(decode(model, centroids), stats))


def wiener_masks(magnitudes: np.ndarray, n_frames: int) -> np.ndarray:
    """Per-bin power ratios M_i^2 / sum_j M_j^2; uniform where the sum vanishes."""
    c, n_bins = magnitudes.shape
    power = magnitudes ** 2
    denom = power.sum(axis=0)
    safe = denom >= MASK_DENOMINATOR_FLOOR
    masks = np.full((c, n_bins), 1.0 / c)
    masks[:, safe] = power[:, safe] / denom[safe]
    return np.repeat(masks[:, :, np.newaxis], n_frames, axis=2)


def reconstruct(mix_spec: ComplexSpectrogram, model: VAEModel, assignment: FrameAssignment,
                stats: FeatureStats) -> SeparatedSources:
    """Mask the mixture spectrogram once per source and resynthesize."""
    if len(assignment) != mix_spec.n_frames:
        raise InvalidArgumentError(
            f"assignment covers {len(assignment)} frames, spectrogram has {mix_spec.n_frames}"
        )
    if stats.dim != mix_spec.n_bins:
        raise InvalidArgumentError(
            f"feature stats cover {stats.dim} bins, spectrogram has {mix_spec.n_bins}"
        )

    if assignment.mode == AssignmentMode.HARD:
        masks = hard_masks(assignment, mix_spec.n_bins)
    else:
        if assignment.centroids is None:
            raise InvalidArgumentError("wiener mode needs the latent cluster centroids")
        magnitudes = centroid_magnitudes(model, assignment.centroids, stats)
        masks = wiener_masks(magnitudes, mix_spec.n_frames)

    signals = [istft(mix_spec.with_bins(mix_spec.bins * mask)) for mask in masks]
    provenance = {"model": model.fingerprint(), "mode": assignment.mode.value}
    return SeparatedSources(signals, mix_spec.sample_rate, masks, provenance)
