"""Minibatch training loop for the VAE."""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from ..exceptions import InvalidArgumentError, NumericError
from ..nn.optim import Adam
from .model import LossBreakdown, VAEModel, encode, loss_and_grads

logger = logging.getLogger(__name__)


@dataclass
class TrainingConfig:
    epochs: int = 200
    batch_size: int = 64
    lr: float = 1e-3
    beta: float = 1.0
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8
    snapshot_stride: int = 10
    kl_warmup_epochs: int = 0

    def __post_init__(self):
        for name in ("epochs", "batch_size", "snapshot_stride"):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.lr <= 0:
            raise InvalidArgumentError(f"lr must be positive, got {self.lr}")
        if self.beta < 0:
            raise InvalidArgumentError(f"beta must be >= 0, got {self.beta}")
        if self.kl_warmup_epochs < 0:
            raise InvalidArgumentError(f"kl_warmup_epochs must be >= 0, got {self.kl_warmup_epochs}")

    def beta_at(self, epoch: int) -> float:
        """Effective KL weight at a 1-based epoch, ramped during warm-up."""
        if self.kl_warmup_epochs and epoch < self.kl_warmup_epochs:
            return self.beta * epoch / self.kl_warmup_epochs
        return self.beta

    def is_snapshot_epoch(self, epoch: int) -> bool:
        return epoch == 1 or epoch % self.snapshot_stride == 0 or epoch == self.epochs


@dataclass
class LatentSnapshot:
    """Posterior means of every training frame at the end of an epoch."""
    epoch: int
    means: np.ndarray


@dataclass
class TrainingResult:
    model: VAEModel
    history: List[LossBreakdown] = field(default_factory=list)
    snapshots: List[LatentSnapshot] = field(default_factory=list)
    steps: int = 0


EpochCallback = Callable[[int, VAEModel, LossBreakdown], None]


def train(model: VAEModel, frames: np.ndarray, cfg: TrainingConfig,
          on_epoch_end: Optional[EpochCallback] = None) -> TrainingResult:
    """Shuffled minibatch descent on the batch-mean negative ELBO.

    One seeded generator drives shuffling and the reparameterization noise, so
    (frames, cfg) fixes the whole run.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] != model.input_dim:
        raise InvalidArgumentError(
            f"frames shape {frames.shape} does not match model input dim {model.input_dim}"
        )
    n_frames = frames.shape[0]
    if n_frames < cfg.batch_size:
        raise InvalidArgumentError(
            f"need at least batch_size={cfg.batch_size} frames, got {n_frames}"
        )

    rng = np.random.default_rng(cfg.seed)
    optimizer = Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps_hat)
    result = TrainingResult(model)
    model.beta = cfg.beta

    logger.info(
        f"Training VAE ({model.n_parameters} parameters) on {n_frames} frames "
        f"for {cfg.epochs} epochs"
    )
    for epoch in range(1, cfg.epochs + 1):
        beta = cfg.beta_at(epoch)
        order = rng.permutation(n_frames)
        recon_sum = kl_sum = 0.0
        for batch_index, start in enumerate(range(0, n_frames, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            eps = rng.standard_normal((idx.size, model.latent_dim))
            try:
                breakdown, grads = loss_and_grads(model, frames[idx], eps, beta)
            except NumericError as exc:
                raise NumericError(f"training diverged at epoch {epoch}, batch {batch_index}: {exc}") from exc
            optimizer.step(model.param_sets, grads)
            recon_sum += breakdown.recon * idx.size
            kl_sum += breakdown.kl * idx.size

        recon, kl = recon_sum / n_frames, kl_sum / n_frames
        epoch_loss = LossBreakdown(recon=recon, kl=kl, total=recon + beta * kl, beta=beta)
        result.history.append(epoch_loss)
        logger.info(
            f"epoch {epoch}/{cfg.epochs} recon={recon:.6f} kl={kl:.6f} "
            f"total={epoch_loss.total:.6f} beta={beta:g}"
        )

        if cfg.is_snapshot_epoch(epoch):
            result.snapshots.append(LatentSnapshot(epoch, encode(model, frames).mu))
        if on_epoch_end is not None:
            on_epoch_end(epoch, model, epoch_loss)

    result.steps = optimizer.t
    return result
