"""Variational autoencoder: model, ELBO objective and training loop."""

from .model import (
    LOGVAR_MAX,
    LOGVAR_MIN,
    GaussianPosterior,
    LossBreakdown,
    VAEArchitecture,
    VAEModel,
    decode,
    encode,
    kl_divergence,
    loss,
    loss_and_grads,
    reparameterize,
)
from .trainer import LatentSnapshot, TrainingConfig, TrainingResult, train

__all__ = [
    "LOGVAR_MAX",
    "LOGVAR_MIN",
    "GaussianPosterior",
    "LatentSnapshot",
    "LossBreakdown",
    "TrainingConfig",
    "TrainingResult",
    "VAEArchitecture",
    "VAEModel",
    "decode",
    "encode",
    "kl_divergence",
    "loss",
    "loss_and_grads",
    "reparameterize",
    "train",
]
