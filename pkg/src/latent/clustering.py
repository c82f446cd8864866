"""K-means over latent means plus cluster-quality scores."""

import logging
from dataclasses import dataclass, field
from typing import List, Union

import numpy as np
from sklearn.metrics import silhouette_score
from sklearn.metrics.cluster import contingency_matrix

from ..exceptions import InvalidArgumentError
from .tsne import LatentCloud

logger = logging.getLogger(__name__)

MAX_LLOYD_ITERS = 300


@dataclass
class Clustering:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    n_iter: int = 0
    inertia_trace: List[float] = field(default_factory=list)

    @property
    def n_clusters(self) -> int:
        return self.centroids.shape[0]


def _sq_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, np.newaxis, :] - centroids[np.newaxis, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _kmeans_plus_plus(points: np.ndarray, c: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = [points[rng.integers(n)]]
    closest = _sq_distances(points, np.array(centroids))[:, 0]
    for _ in range(1, c):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)
        centroids.append(points[idx])
        closest = np.minimum(closest, _sq_distances(points, points[idx:idx + 1])[:, 0])
    return np.array(centroids)


def _repair_empty(points: np.ndarray, labels: np.ndarray, d2: np.ndarray, c: int) -> np.ndarray:
    """Give each empty cluster the point farthest from its own centroid."""
    labels = labels.copy()
    own = d2[np.arange(points.shape[0]), labels]
    for j in range(c):
        if np.any(labels == j):
            continue
        counts = np.bincount(labels, minlength=c)
        candidates = np.where(counts[labels] > 1, own, -np.inf)
        victim = int(np.argmax(candidates))
        labels[victim] = j
        own[victim] = -np.inf
    return labels


def _lloyd(points: np.ndarray, centroids: np.ndarray, max_iter: int) -> Clustering:
    c = centroids.shape[0]
    labels = None
    trace: List[float] = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = _sq_distances(points, centroids)
        # argmin resolves ties toward the lower centroid index.
        new_labels = np.argmin(d2, axis=1)
        trace.append(float(d2[np.arange(points.shape[0]), new_labels].sum()))
        new_labels = _repair_empty(points, new_labels, d2, c)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centroids = np.array([points[labels == j].mean(axis=0) for j in range(c)])

    # Final partition: nearest centroid, then the same repair, so no cluster is empty.
    d2 = _sq_distances(points, centroids)
    labels = _repair_empty(points, np.argmin(d2, axis=1), d2, c)
    centroids = np.array([points[labels == j].mean(axis=0) for j in range(c)])
    d2 = _sq_distances(points, centroids)
    inertia = float(d2[np.arange(points.shape[0]), labels].sum())
    return Clustering(labels.astype(np.int64), centroids, inertia, n_iter, trace)


def kmeans(cloud: Union[LatentCloud, np.ndarray], c: int = 2, restarts: int = 10,
           seed: int = 0, max_iter: int = MAX_LLOYD_ITERS) -> Clustering:
    """k-means++ seeding and Lloyd iterations; best inertia over seeded restarts."""
    points = cloud.points if isinstance(cloud, LatentCloud) else np.asarray(cloud, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, np.newaxis]
    n = points.shape[0]
    if c < 1:
        raise InvalidArgumentError(f"cluster count must be >= 1, got {c}")
    if c > n:
        raise InvalidArgumentError(f"cluster count {c} exceeds point count {n}")
    if restarts < 1:
        raise InvalidArgumentError(f"restarts must be >= 1, got {restarts}")

    rng = np.random.default_rng(seed)
    best = None
    for restart in range(restarts):
        result = _lloyd(points, _kmeans_plus_plus(points, c, rng), max_iter)
        if best is None or result.inertia < best.inertia:
            best = result
    logger.debug(f"k-means c={c}: best inertia {best.inertia:.6f} after {best.n_iter} iterations")
    return best


def purity(assignments: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of points whose cluster's majority label matches their own."""
    assignments = np.asarray(assignments)
    labels = np.asarray(labels)
    if assignments.shape != labels.shape:
        raise InvalidArgumentError(
            f"assignments ({assignments.size}) and labels ({labels.size}) differ in length"
        )
    if assignments.size == 0:
        raise InvalidArgumentError("purity needs at least one element")
    table = contingency_matrix(assignments, labels)
    return float(table.max(axis=1).sum() / assignments.size)


def silhouette(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette coefficient; singleton clusters contribute 0."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, np.newaxis]
    labels = np.asarray(labels)
    n = points.shape[0]
    if labels.shape != (n,):
        raise InvalidArgumentError(f"{labels.size} labels for {n} points")
    if n < 3:
        raise InvalidArgumentError(f"silhouette needs at least 3 points, got {n}")
    n_labels = np.unique(labels).size
    if n_labels < 2:
        raise InvalidArgumentError("silhouette needs at least 2 clusters")
    if n_labels == n:
        return 0.0
    return float(silhouette_score(points, labels, metric="euclidean"))
