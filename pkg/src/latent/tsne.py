"""
Exact t-SNE for latent clouds
Perplexity-matched Gaussian affinities, Student-t low-dimensional similarities
and momentum gradient descent with early exaggeration and adaptive gains.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.spatial.distance import pdist, squareform

from ..exceptions import InvalidArgumentError, NumericError

logger = logging.getLogger(__name__)

MACHINE_EPSILON = np.finfo(np.double).eps
EXAGGERATION_ITERS = 250
EARLY_EXAGGERATION = 12.0
INITIAL_MOMENTUM = 0.5
FINAL_MOMENTUM = 0.8
MIN_GAIN = 0.01
KL_CHECK_INTERVAL = 10


@dataclass
class LatentCloud:
    """Posterior means of N frames at one epoch."""
    points: np.ndarray
    epoch: int = 0
    frame_indices: Optional[np.ndarray] = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[0] < 2:
            raise InvalidArgumentError(f"latent cloud needs at least 2 points, got {self.points.shape}")
        if not np.all(np.isfinite(self.points)):
            raise InvalidArgumentError("latent cloud contains non-finite values")
        if self.frame_indices is None:
            self.frame_indices = np.arange(self.points.shape[0])
        self.frame_indices = np.asarray(self.frame_indices, dtype=np.int64)
        if self.frame_indices.shape != (self.points.shape[0],):
            raise InvalidArgumentError("frame_indices must align with points")

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass
class Embedding2D:
    coords: np.ndarray
    kl_trace: List[Tuple[int, float]] = field(default_factory=list)

    @property
    def final_kl(self) -> float:
        return self.kl_trace[-1][1] if self.kl_trace else float("nan")


def _row_entropy(sq_dist_row: np.ndarray, beta: float) -> Tuple[np.ndarray, float]:
    """Conditional distribution for one row and its entropy in nats."""
    shifted = sq_dist_row - sq_dist_row.min()
    weights = np.exp(-shifted * beta)
    total = weights.sum()
    p = weights / total
    entropy = np.log(total) + beta * np.dot(shifted, p)
    return p, entropy


def conditional_affinities(sq_distances: np.ndarray, perplexity: float,
                           max_steps: int = 30, tol: float = 1e-5) -> Tuple[np.ndarray, np.ndarray]:
    """Row-wise bisection on the Gaussian precision to match ``perplexity``.

    Returns the conditional matrix P (zero diagonal, rows sum to 1) and each
    row's entropy in bits. The search starts at the inverse median distance of
    the row, doubles or halves until bracketed, then bisects.
    """
    n = sq_distances.shape[0]
    target = np.log(perplexity)
    P = np.zeros((n, n))
    entropies = np.zeros(n)
    for i in range(n):
        row = np.delete(sq_distances[i], i)
        median = np.median(row)
        beta = 1.0 / median if median > 0 else 1.0
        lo, hi = 0.0, np.inf
        p, entropy = _row_entropy(row, beta)
        for _ in range(max_steps):
            diff = entropy - target
            if abs(diff) <= tol:
                break
            if diff > 0:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
            else:
                hi = beta
                beta = beta / 2.0 if lo == 0.0 else (beta + lo) / 2.0
            p, entropy = _row_entropy(row, beta)
        P[i, np.arange(n) != i] = p
        entropies[i] = entropy / np.log(2.0)
    return P, entropies


def joint_probabilities(points: np.ndarray, perplexity: float) -> np.ndarray:
    """Symmetrized affinities (P + P^T) / 2N; sums to 1."""
    sq_distances = squareform(pdist(points, "sqeuclidean"))
    conditional, _ = conditional_affinities(sq_distances, perplexity)
    return (conditional + conditional.T) / (2.0 * points.shape[0])


def _kl_and_gradient(P: np.ndarray, Y: np.ndarray) -> Tuple[float, np.ndarray]:
    num = 1.0 / (1.0 + squareform(pdist(Y, "sqeuclidean")))
    np.fill_diagonal(num, 0.0)
    Q = np.maximum(num / num.sum(), MACHINE_EPSILON)
    kl = float(np.sum(P * np.log(np.maximum(P, MACHINE_EPSILON) / Q)))
    W = (P - Q) * num
    grad = 4.0 * (np.diag(W.sum(axis=1)) - W) @ Y
    return kl, grad


def tsne(cloud: LatentCloud, perplexity: float = 30.0, iters: int = 1000, seed: int = 0,
         learning_rate: float = 200.0) -> Embedding2D:
    """Exact O(N^2) t-SNE of a latent cloud into two dimensions."""
    points = cloud.points
    n = points.shape[0]
    if perplexity <= 0 or 3.0 * perplexity >= n:
        raise InvalidArgumentError(
            f"perplexity {perplexity} too large for {n} points (need 3 * perplexity < N)"
        )
    if iters < EXAGGERATION_ITERS:
        raise InvalidArgumentError(f"iters must be >= {EXAGGERATION_ITERS}, got {iters}")
    if np.all(np.ptp(points, axis=0) == 0):
        raise InvalidArgumentError("all points are identical; jitter them before embedding")

    P = joint_probabilities(points, perplexity)
    rng = np.random.default_rng(seed)
    Y = rng.normal(0.0, 1e-4, size=(n, 2))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    trace: List[Tuple[int, float]] = []

    for it in range(1, iters + 1):
        exaggerated = it <= EXAGGERATION_ITERS
        momentum = INITIAL_MOMENTUM if exaggerated else FINAL_MOMENTUM
        _, grad = _kl_and_gradient(P * EARLY_EXAGGERATION if exaggerated else P, Y)

        inc = update * grad < 0.0
        gains[inc] += 0.2
        gains[~inc] *= 0.8
        np.clip(gains, MIN_GAIN, None, out=gains)
        update = momentum * update - learning_rate * gains * grad
        Y = Y + update
        Y -= Y.mean(axis=0)

        if not np.all(np.isfinite(Y)):
            raise NumericError(f"t-SNE diverged at iteration {it}")
        if it % KL_CHECK_INTERVAL == 0 or it == iters:
            kl, _ = _kl_and_gradient(P, Y)
            trace.append((it, kl))
            logger.debug(f"t-SNE iteration {it}: KL={kl:.6f}")

    return Embedding2D(coords=Y, kl_trace=trace)
