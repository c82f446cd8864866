"""Latent-space structure: t-SNE embeddings, k-means, cluster metrics."""

from .clustering import Clustering, kmeans, purity, silhouette
from .tsne import Embedding2D, LatentCloud, conditional_affinities, joint_probabilities, tsne

__all__ = [
    "Clustering",
    "Embedding2D",
    "LatentCloud",
    "conditional_affinities",
    "joint_probabilities",
    "kmeans",
    "purity",
    "silhouette",
    "tsne",
]
