"""Minimal dense network engine: tape, parameters, Adam, gradient check."""

from .gradcheck import GradCheckReport, grad_check, relative_error
from .optim import Adam, adam_step
from .tape import ACTIVATIONS, GradTape, Gradients, ParamSet, as_matrix, mlp_forward

__all__ = [
    "ACTIVATIONS",
    "Adam",
    "GradCheckReport",
    "GradTape",
    "Gradients",
    "ParamSet",
    "adam_step",
    "as_matrix",
    "grad_check",
    "mlp_forward",
    "relative_error",
]
