"""
Dense network core with reverse-mode gradients
Parameter containers and a recording tape for plain MLP chains in float64.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import InvalidArgumentError, NumericError, TapeStateError

logger = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "tanh", "identity")

Gradients = Dict[str, np.ndarray]


def _check_finite(name: str, value: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(value)):
        raise NumericError(f"non-finite values produced by {name}")
    return value


def as_matrix(x: np.ndarray) -> np.ndarray:
    """Promote a vector to a one-row matrix; matrices pass through."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[np.newaxis, :]
    if x.ndim != 2:
        raise InvalidArgumentError(f"expected a vector or matrix, got shape {x.shape}")
    return x


@dataclass
class ParamSet:
    """Named dense layers plus the optimizer's moment buffers.

    Layer ``i`` of a set with prefix ``p`` stores ``p.i.weight`` (in x out) and
    ``p.i.bias`` (out,).
    """
    prefix: str
    sizes: Tuple[int, ...]
    params: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)
    moment1: Dict[str, np.ndarray] = field(default_factory=dict)
    moment2: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.sizes = tuple(int(s) for s in self.sizes)
        if len(self.sizes) < 2 or any(s <= 0 for s in self.sizes):
            raise InvalidArgumentError(f"invalid layer sizes {self.sizes}")
        for name, shape in self.expected_shapes().items():
            if name in self.params:
                if self.params[name].shape != shape:
                    raise InvalidArgumentError(
                        f"{name} has shape {self.params[name].shape}, expected {shape}"
                    )
            else:
                self.params[name] = np.zeros(shape)
        for name, value in self.params.items():
            self.moment1.setdefault(name, np.zeros_like(value))
            self.moment2.setdefault(name, np.zeros_like(value))

    @classmethod
    def initialize(cls, prefix: str, sizes: Sequence[int], rng: np.random.Generator) -> "ParamSet":
        """Glorot-uniform weights, zero biases; draws come from the caller's generator."""
        pset = cls(prefix, tuple(sizes))
        for i, (fan_in, fan_out) in enumerate(zip(pset.sizes[:-1], pset.sizes[1:])):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            pset.params[pset.weight_name(i)] = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        return pset

    def weight_name(self, layer: int) -> str:
        return f"{self.prefix}.{layer}.weight"

    def bias_name(self, layer: int) -> str:
        return f"{self.prefix}.{layer}.bias"

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def expected_shapes(self) -> "OrderedDict[str, Tuple[int, ...]]":
        shapes = OrderedDict()
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            shapes[self.weight_name(i)] = (fan_in, fan_out)
            shapes[self.bias_name(i)] = (fan_out,)
        return shapes

    def layer(self, index: int) -> Tuple[np.ndarray, np.ndarray]:
        if not 0 <= index < self.n_layers:
            raise InvalidArgumentError(f"{self.prefix} has no layer {index}")
        return self.params[self.weight_name(index)], self.params[self.bias_name(index)]

    def zeros_like(self) -> Gradients:
        return OrderedDict((name, np.zeros_like(v)) for name, v in self.params.items())

    def items(self) -> Iterator[Tuple[str, np.ndarray]]:
        return iter(self.params.items())

    @property
    def n_parameters(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    def copy(self) -> "ParamSet":
        return ParamSet(
            self.prefix,
            self.sizes,
            OrderedDict((k, v.copy()) for k, v in self.params.items()),
            {k: v.copy() for k, v in self.moment1.items()},
            {k: v.copy() for k, v in self.moment2.items()},
        )


@dataclass
class _Record:
    op: str
    inputs: np.ndarray
    output: Union[np.ndarray, float]
    pset: Optional[ParamSet] = None
    layer: int = -1
    target: Optional[np.ndarray] = None


class GradTape:
    """Records a forward MLP pass and replays it backwards once.

    The tape is strictly sequential: every op consumes the previous op's
    output. ``backward`` walks the records in exact reverse order.
    """

    def __init__(self):
        self._records: List[_Record] = []
        self._consumed = False
        self.input_grad: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self._records)

    def _check_chain(self, x: np.ndarray) -> None:
        if self._consumed:
            raise TapeStateError("tape already replayed; record a fresh forward pass")
        if self._records and self._records[-1].op in ("sum", "half_sq_error"):
            raise TapeStateError("cannot record past a scalar reduction")

    def affine(self, x: np.ndarray, pset: ParamSet, layer: int) -> np.ndarray:
        x = as_matrix(x)
        self._check_chain(x)
        weight, bias = pset.layer(layer)
        if x.shape[1] != weight.shape[0]:
            raise InvalidArgumentError(
                f"input width {x.shape[1]} does not match {pset.weight_name(layer)} "
                f"rows {weight.shape[0]}"
            )
        out = _check_finite(pset.weight_name(layer), x @ weight + bias)
        self._records.append(_Record("affine", x, out, pset, layer))
        return out

    def activation(self, x: np.ndarray, kind: str) -> np.ndarray:
        x = as_matrix(x)
        self._check_chain(x)
        if kind == "relu":
            out = np.maximum(x, 0.0)
        elif kind == "tanh":
            out = np.tanh(x)
        elif kind == "identity":
            out = x.copy()
        else:
            raise InvalidArgumentError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")
        self._records.append(_Record(kind, x, _check_finite(kind, out)))
        return out

    def sum(self, x: np.ndarray) -> float:
        x = as_matrix(x)
        self._check_chain(x)
        out = float(_check_finite("sum", np.asarray(x.sum())))
        self._records.append(_Record("sum", x, out))
        return out

    def half_sq_error(self, x: np.ndarray, target: np.ndarray) -> float:
        """0.5 * sum((x - target)^2) over every element."""
        x = as_matrix(x)
        self._check_chain(x)
        target = as_matrix(target)
        if target.shape != x.shape:
            raise InvalidArgumentError(f"target shape {target.shape} does not match {x.shape}")
        diff = x - target
        out = float(_check_finite("half_sq_error", np.asarray(0.5 * np.sum(diff * diff))))
        self._records.append(_Record("half_sq_error", x, out, target=target))
        return out

    def backward(self, output_grad: Union[float, np.ndarray],
                 params: Sequence[ParamSet] = ()) -> Gradients:
        """Reverse-mode gradients for every parameter in ``params``.

        ``output_grad`` is the scalar seed when the tape ends in a reduction,
        otherwise the gradient with respect to the last recorded output.
        Parameters the tape never touched get zero gradients. The gradient with
        respect to the tape input is left in ``input_grad``.
        """
        if not self._records:
            raise TapeStateError("backward called before any forward pass was recorded")
        if self._consumed:
            raise TapeStateError("backward called twice without a new forward pass")
        self._consumed = True

        grads: Gradients = OrderedDict()
        for pset in params:
            grads.update(pset.zeros_like())

        last = self._records[-1]
        if last.op in ("sum", "half_sq_error"):
            if np.ndim(output_grad) != 0:
                raise InvalidArgumentError("tape ends in a scalar; seed must be a scalar")
        else:
            output_grad = as_matrix(output_grad)
            if output_grad.shape != np.shape(last.output):
                raise InvalidArgumentError(
                    f"seed shape {output_grad.shape} does not match output {np.shape(last.output)}"
                )

        g = output_grad
        for rec in reversed(self._records):
            if rec.op == "sum":
                g = np.full_like(rec.inputs, float(g))
            elif rec.op == "half_sq_error":
                g = float(g) * (rec.inputs - rec.target)
            elif rec.op == "identity":
                pass
            elif rec.op == "tanh":
                g = g * (1.0 - rec.output ** 2)
            elif rec.op == "relu":
                g = g * (rec.inputs > 0.0)
            elif rec.op == "affine":
                weight, _ = rec.pset.layer(rec.layer)
                w_name, b_name = rec.pset.weight_name(rec.layer), rec.pset.bias_name(rec.layer)
                if w_name in grads:
                    grads[w_name] += rec.inputs.T @ g
                    grads[b_name] += g.sum(axis=0)
                g = g @ weight.T
            _check_finite(f"backward through {rec.op}", np.asarray(g))

        self.input_grad = g
        return grads


def mlp_forward(tape: GradTape, pset: ParamSet, x: np.ndarray,
                hidden_activation: str = "tanh", output_activation: str = "identity") -> np.ndarray:
    """Affine layers with ``hidden_activation`` between them, recorded on ``tape``."""
    h = as_matrix(x)
    for i in range(pset.n_layers):
        h = tape.affine(h, pset, i)
        h = tape.activation(h, output_activation if i == pset.n_layers - 1 else hidden_activation)
    return h
