"""Adaptive-moment (Adam) optimizer over ParamSets."""

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from ..exceptions import InvalidArgumentError, NumericError
from .tape import ParamSet


def adam_step(params: ParamSet, grads: Mapping[str, np.ndarray], lr: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999, eps_hat: float = 1e-8,
              t: int = 1) -> ParamSet:
    """One bias-corrected Adam update, applied in place to ``params``."""
    if t < 1:
        raise InvalidArgumentError(f"step index t must be >= 1, got {t}")
    for name, g in grads.items():
        if name not in params.params:
            continue
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name}")
        if g.shape != params.params[name].shape:
            raise InvalidArgumentError(
                f"gradient for {name} has shape {g.shape}, expected {params.params[name].shape}"
            )

    correction1 = 1.0 - beta1 ** t
    correction2 = 1.0 - beta2 ** t
    for name, value in params.params.items():
        g = grads.get(name)
        if g is None:
            continue
        m = params.moment1[name]
        v = params.moment2[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        value -= lr * m_hat / (np.sqrt(v_hat) + eps_hat)
    return params


@dataclass
class Adam:
    """Holds the hyperparameters and the shared step counter."""
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8
    t: int = 0

    def step(self, param_sets: Sequence[ParamSet], grads: Mapping[str, np.ndarray],
             lr: Optional[float] = None) -> None:
        self.t += 1
        for pset in param_sets:
            adam_step(pset, grads, lr if lr is not None else self.lr,
                      self.beta1, self.beta2, self.eps_hat, self.t)
