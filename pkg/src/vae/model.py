"""
Variational autoencoder over spectrogram frames
Gaussian encoder q(z|x), unit-variance Gaussian decoder p(x|z), standard
normal prior, reparameterized sampling and the negative-ELBO objective.
"""

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ..exceptions import InvalidArgumentError, NumericError
from ..nn.tape import GradTape, Gradients, ParamSet, as_matrix, mlp_forward

logger = logging.getLogger(__name__)

LOGVAR_MIN = -10.0
LOGVAR_MAX = 10.0


@dataclass(frozen=True)
class VAEArchitecture:
    """Encoder n -> hidden... -> 2k, decoder k -> reversed hidden... -> n."""
    input_dim: int = 129
    latent_dim: int = 8
    hidden_sizes: Tuple[int, ...] = (64, 32)
    activation: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.input_dim < 1 or self.latent_dim < 1:
            raise InvalidArgumentError(
                f"input_dim and latent_dim must be positive, got {self.input_dim}, {self.latent_dim}"
            )
        if not self.hidden_sizes or any(h < 1 for h in self.hidden_sizes):
            raise InvalidArgumentError(f"invalid hidden sizes {self.hidden_sizes}")

    @property
    def encoder_sizes(self) -> Tuple[int, ...]:
        return (self.input_dim,) + self.hidden_sizes + (2 * self.latent_dim,)

    @property
    def decoder_sizes(self) -> Tuple[int, ...]:
        return (self.latent_dim,) + tuple(reversed(self.hidden_sizes)) + (self.input_dim,)


@dataclass
class GaussianPosterior:
    """Diagonal Gaussian q(z|x); rows are frames when batched."""
    mu: np.ndarray
    logvar: np.ndarray

    def __post_init__(self):
        if self.mu.shape != self.logvar.shape:
            raise InvalidArgumentError(
                f"mu shape {self.mu.shape} does not match logvar shape {self.logvar.shape}"
            )
        if not (np.all(np.isfinite(self.mu)) and np.all(np.isfinite(self.logvar))):
            raise NumericError("posterior parameters are not finite")

    @property
    def std(self) -> np.ndarray:
        return np.exp(0.5 * self.logvar)


@dataclass
class LossBreakdown:
    """Negative ELBO split into its two terms; ``beta`` is the KL weight applied."""
    recon: float
    kl: float
    total: float
    beta: float = 1.0


@dataclass
class VAEModel:
    architecture: VAEArchitecture
    encoder: ParamSet
    decoder: ParamSet
    beta: float = 1.0

    def __post_init__(self):
        if self.beta < 0:
            raise InvalidArgumentError(f"beta must be >= 0, got {self.beta}")
        if self.encoder.sizes != self.architecture.encoder_sizes:
            raise InvalidArgumentError(
                f"encoder sizes {self.encoder.sizes} do not match {self.architecture.encoder_sizes}"
            )
        if self.decoder.sizes != self.architecture.decoder_sizes:
            raise InvalidArgumentError(
                f"decoder sizes {self.decoder.sizes} do not match {self.architecture.decoder_sizes}"
            )

    @classmethod
    def create(cls, architecture: VAEArchitecture, rng: np.random.Generator,
               beta: float = 1.0) -> "VAEModel":
        encoder = ParamSet.initialize("encoder", architecture.encoder_sizes, rng)
        decoder = ParamSet.initialize("decoder", architecture.decoder_sizes, rng)
        return cls(architecture, encoder, decoder, beta)

    @property
    def input_dim(self) -> int:
        return self.architecture.input_dim

    @property
    def latent_dim(self) -> int:
        return self.architecture.latent_dim

    @property
    def param_sets(self) -> Tuple[ParamSet, ParamSet]:
        return (self.encoder, self.decoder)

    @property
    def n_parameters(self) -> int:
        return self.encoder.n_parameters + self.decoder.n_parameters

    def fingerprint(self) -> str:
        """SHA-256 over every parameter block, in name order."""
        digest = hashlib.sha256()
        for pset in self.param_sets:
            for name, value in pset.items():
                digest.update(name.encode())
                digest.update(np.ascontiguousarray(value, dtype="<f8").tobytes())
        return digest.hexdigest()


def _check_width(x: np.ndarray, expected: int, what: str) -> None:
    if x.shape[-1] != expected:
        raise InvalidArgumentError(f"{what} has length {x.shape[-1]}, expected {expected}")


def _restore_shape(value: np.ndarray, like: np.ndarray) -> np.ndarray:
    return value[0] if np.ndim(like) == 1 else value


def _encode(model: VAEModel, x: np.ndarray, tape: GradTape) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (mu, clamped logvar, raw logvar) for a batch."""
    k = model.latent_dim
    out = mlp_forward(tape, model.encoder, x, model.architecture.activation, "identity")
    raw_logvar = out[:, k:]
    return out[:, :k], np.clip(raw_logvar, LOGVAR_MIN, LOGVAR_MAX), raw_logvar


def encode(model: VAEModel, x: np.ndarray) -> GaussianPosterior:
    """Posterior parameters for one frame (vector) or a batch (rows)."""
    x = np.asarray(x, dtype=np.float64)
    _check_width(x, model.input_dim, "feature frame")
    mu, logvar, _ = _encode(model, as_matrix(x), GradTape())
    return GaussianPosterior(_restore_shape(mu, x), _restore_shape(logvar, x))


def reparameterize(post: GaussianPosterior, eps: np.ndarray) -> np.ndarray:
    """z = mu + exp(logvar / 2) * eps."""
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != post.mu.shape:
        raise InvalidArgumentError(f"eps shape {eps.shape} does not match posterior {post.mu.shape}")
    return post.mu + np.exp(0.5 * post.logvar) * eps


def decode(model: VAEModel, z: np.ndarray) -> np.ndarray:
    """Mean of the unit-variance Gaussian likelihood for each latent row."""
    z = np.asarray(z, dtype=np.float64)
    _check_width(z, model.latent_dim, "latent vector")
    out = mlp_forward(GradTape(), model.decoder, as_matrix(z), model.architecture.activation, "identity")
    return _restore_shape(out, z)


def kl_divergence(post: GaussianPosterior) -> np.ndarray:
    """Closed-form KL(q || N(0, I)) summed over latent dims (per row when batched)."""
    terms = post.mu ** 2 + np.exp(post.logvar) - 1.0 - post.logvar
    return 0.5 * np.sum(terms, axis=-1)


def loss_and_grads(model: VAEModel, x: np.ndarray, eps: np.ndarray,
                   beta: Optional[float] = None) -> Tuple[LossBreakdown, Gradients]:
    """Batch-mean negative ELBO and its exact gradients for encoder and decoder."""
    beta = model.beta if beta is None else beta
    x = as_matrix(x)
    eps = as_matrix(eps)
    _check_width(x, model.input_dim, "feature frame")
    if eps.shape != (x.shape[0], model.latent_dim):
        raise InvalidArgumentError(
            f"eps shape {eps.shape} does not match ({x.shape[0]}, {model.latent_dim})"
        )
    batch = x.shape[0]

    enc_tape = GradTape()
    mu, logvar, raw_logvar = _encode(model, x, enc_tape)
    std = np.exp(0.5 * logvar)
    z = mu + std * eps

    dec_tape = GradTape()
    x_hat = mlp_forward(dec_tape, model.decoder, z, model.architecture.activation, "identity")

    diff = x_hat - x
    recon = float(0.5 * np.sum(diff * diff) / batch)
    kl = float(np.sum(kl_divergence(GaussianPosterior(mu, logvar))) / batch)
    total = recon + beta * kl
    if not np.isfinite(total):
        raise NumericError(f"non-finite loss (recon={recon}, kl={kl})")

    grads = dec_tape.backward(diff / batch, [model.decoder])
    dz = dec_tape.input_grad

    d_mu = dz + beta * mu / batch
    d_logvar = dz * eps * 0.5 * std + beta * 0.5 * (np.exp(logvar) - 1.0) / batch
    # The clamp passes no gradient where it is active.
    d_logvar = d_logvar * ((raw_logvar > LOGVAR_MIN) & (raw_logvar < LOGVAR_MAX))
    grads.update(enc_tape.backward(np.concatenate([d_mu, d_logvar], axis=1), [model.encoder]))

    return LossBreakdown(recon=recon, kl=kl, total=total, beta=beta), grads


def loss(model: VAEModel, x: np.ndarray, eps: np.ndarray,
         beta: Optional[float] = None) -> LossBreakdown:
    """Single-sample negative ELBO (constants dropped), averaged over frames."""
    breakdown, _ = loss_and_grads(model, x, eps, beta)
    return breakdown
