"""Central finite-difference check of analytic gradients."""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Sequence, Tuple

import numpy as np

from .tape import Gradients, ParamSet

logger = logging.getLogger(__name__)

EPS = float(np.finfo(np.float64).eps)
MIN_FLOOR = 1e-8

LossAndGrads = Callable[[Sequence[ParamSet], Any], Tuple[float, Gradients]]


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_parameter: str
    n_checked: int
    tolerance: float
    failures: List[str] = field(default_factory=list)
    per_parameter: Dict[str, float] = field(default_factory=dict)
    floor: float = MIN_FLOOR

    @property
    def passed(self) -> bool:
        return not self.failures


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = MIN_FLOOR) -> np.ndarray:
    """|a - n| / max(|a|, |n|, floor): relative above ``floor``, scaled-absolute below it."""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale


def error_floor(loss: float, tolerance: float, h: float) -> float:
    """Gradient magnitude below which central differences are too noisy to compare relatively.

    The difference quotient carries about eps*|loss|/h of rounding error and
    h**2*|loss| of truncation error.
    """
    noise = (EPS / h + h * h) * max(abs(loss), 1.0)
    return max(noise / tolerance, MIN_FLOOR)


def grad_check(fn: LossAndGrads, param_sets: Sequence[ParamSet], batch: Any,
               tolerance: float = 1e-4, h: float = 1e-4) -> GradCheckReport:
    """Compare ``fn``'s analytic gradients with central differences.

    ``fn(param_sets, batch)`` must return ``(loss, grads)`` and be deterministic.
    The step for each entry is ``h * max(1, |p|)``; gradients smaller than
    :func:`error_floor` are compared on an absolute scale.
    """
    loss0, analytic = fn(param_sets, batch)
    floor = error_floor(float(loss0), tolerance, h)

    max_err, worst, n_checked = 0.0, "", 0
    failures: List[str] = []
    per_parameter: Dict[str, float] = {}
    for pset in param_sets:
        for name, value in pset.items():
            numeric = np.zeros_like(value)
            flat = value.reshape(-1)
            num_flat = numeric.reshape(-1)
            for i in range(flat.size):
                original = flat[i]
                step = h * max(1.0, abs(original))
                flat[i] = original + step
                plus, _ = fn(param_sets, batch)
                flat[i] = original - step
                minus, _ = fn(param_sets, batch)
                flat[i] = original
                num_flat[i] = (plus - minus) / (2.0 * step)
            err = float(np.max(relative_error(analytic[name], numeric, floor))) if value.size else 0.0
            per_parameter[name] = err
            n_checked += value.size
            if err >= max_err:
                max_err, worst = err, name
            if err > tolerance:
                failures.append(f"{name}: relative error {err:.3e} exceeds {tolerance:.1e}")

    logger.debug(
        f"Gradient check over {n_checked} entries: max relative error {max_err:.3e} (floor {floor:.1e})"
    )
    return GradCheckReport(max_err, worst, n_checked, tolerance, failures, per_parameter, floor)
