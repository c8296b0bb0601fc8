"""Dense-layer numerics: forward transforms, hand-derived backward passes,
optimizer steps and a central-difference gradient oracle.

Arrays are float64 numpy arrays. A batch is a 2-D array whose leading
dimension indexes rows; single vectors are accepted wherever a batch is.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, NumericError, ShapeError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class DenseLayer:
    weight: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.ndim != 1:
            raise ShapeError(
                f"layer expects a 2-D weight and 1-D bias, got {self.weight.shape} and {self.bias.shape}"
            )
        if self.weight.shape[0] != self.bias.shape[0]:
            raise ShapeError(
                f"weight has {self.weight.shape[0]} rows but bias has length {self.bias.shape[0]}"
            )
        if not (np.all(np.isfinite(self.weight)) and np.all(np.isfinite(self.bias))):
            raise NumericError("layer parameters must be finite")

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    def copy(self) -> DenseLayer:
        return DenseLayer(self.weight.copy(), self.bias.copy())


def he_uniform_layer(rng: np.random.Generator, in_dim: int, out_dim: int) -> DenseLayer:
    bound = np.sqrt(6.0 / in_dim)
    weight = rng.uniform(-bound, bound, size=(out_dim, in_dim))
    return DenseLayer(weight, np.zeros(out_dim))


def _check_input(x: np.ndarray, in_dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != in_dim:
        raise ShapeError(f"expected input with {in_dim} columns, got shape {x.shape}")
    return x


def linear_forward(x, layer: DenseLayer) -> np.ndarray:
    x = _check_input(x, layer.in_dim)
    return x @ layer.weight.T + layer.bias


def relu_forward(z) -> np.ndarray:
    return np.maximum(np.asarray(z, dtype=np.float64), 0.0)


def linear_backward(d_out, x, layer: DenseLayer):
    """Gradients of a linear map given the upstream gradient ``d_out``.

    Returns ``(dW, db, dx)``. For a batch, ``dW`` and ``db`` are summed over
    rows while ``dx`` keeps one row per input row.
    """
    x = _check_input(x, layer.in_dim)
    d_out = np.asarray(d_out, dtype=np.float64)
    if d_out.ndim != x.ndim or d_out.shape[-1] != layer.out_dim or d_out.shape[:-1] != x.shape[:-1]:
        raise ShapeError(
            f"upstream gradient shape {d_out.shape} does not match output of "
            f"{layer.out_dim} units for input shape {x.shape}"
        )
    if x.ndim == 1:
        dW = np.outer(d_out, x)
        db = d_out.copy()
    else:
        dW = d_out.T @ x
        db = d_out.sum(axis=0)
    dx = d_out @ layer.weight
    return dW, db, dx


def relu_backward(d_a, z) -> np.ndarray:
    d_a = np.asarray(d_a, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if d_a.shape != z.shape:
        raise ShapeError(f"gradient shape {d_a.shape} does not match pre-activation shape {z.shape}")
    # subgradient at exactly zero is 0
    return np.where(z > 0.0, d_a, 0.0)


@dataclass
class OptimizerState:
    """Adaptive-moment accumulators for a named set of parameter blocks."""

    lr: float
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0

    @classmethod
    def for_params(cls, params: dict, lr: float) -> OptimizerState:
        if not lr > 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        return cls(
            lr=lr,
            m={k: np.zeros_like(p, dtype=np.float64) for k, p in params.items()},
            v={k: np.zeros_like(p, dtype=np.float64) for k, p in params.items()},
        )

    def copy(self) -> OptimizerState:
        return OptimizerState(
            lr=self.lr,
            m={k: a.copy() for k, a in self.m.items()},
            v={k: a.copy() for k, a in self.v.items()},
            step=self.step,
        )


def _check_blocks(params: dict, grads: dict, state: OptimizerState | None = None):
    if params.keys() != grads.keys():
        raise ShapeError(f"parameter blocks {sorted(params)} do not match gradient blocks {sorted(grads)}")
    for k, p in params.items():
        g = grads[k]
        if np.shape(p) != np.shape(g):
            raise ShapeError(f"block {k!r}: parameter shape {np.shape(p)} vs gradient shape {np.shape(g)}")
        if state is not None and (k not in state.m or state.m[k].shape != np.shape(p)):
            raise ShapeError(f"block {k!r}: optimizer accumulator does not match parameter shape {np.shape(p)}")
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in parameter block {k!r}")


def adam_step(params: dict, grads: dict, state: OptimizerState):
    """One bias-corrected Adam update. Inputs are left untouched.

    Returns ``(new_params, new_state)``.
    """
    if not state.lr > 0:
        raise ConfigError(f"learning rate must be positive, got {state.lr}")
    _check_blocks(params, grads, state)
    t = state.step + 1
    bc1 = 1.0 - ADAM_BETA1**t
    bc2 = 1.0 - ADAM_BETA2**t
    new_params, new_m, new_v = {}, {}, {}
    for k, p in params.items():
        new_params[k], new_m[k], new_v[k] = kernels.adam_update(
            p, grads[k], state.m[k], state.v[k], state.lr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS, bc1, bc2
        )
    return new_params, OptimizerState(lr=state.lr, m=new_m, v=new_v, step=t)


def sgd_step(params: dict, grads: dict, state: OptimizerState):
    """Plain gradient descent; moment accumulators are carried unchanged."""
    if not state.lr > 0:
        raise ConfigError(f"learning rate must be positive, got {state.lr}")
    _check_blocks(params, grads, state)
    new_params = {k: p - state.lr * grads[k] for k, p in params.items()}
    return new_params, OptimizerState(lr=state.lr, m=state.m, v=state.v, step=state.step + 1)


OPTIMIZERS = {"adaptive": adam_step, "plain-sgd": sgd_step}


def clip_global_norm(grads: dict, max_norm: float):
    """Rescale ``grads`` so their joint L2 norm is at most ``max_norm``.

    Returns ``(grads, clipped)``.
    """
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if total <= max_norm:
        return grads, False
    scale = max_norm / total
    return {k: g * scale for k, g in grads.items()}, True


def finite_difference_check(loss_fn, params: dict, analytic: dict, epsilon: float = 1e-6) -> float:
    """Largest relative disagreement between ``analytic`` and central differences.

    ``loss_fn`` maps a dict of parameter arrays to a float and must be
    deterministic. The error per entry is
    ``|analytic - numeric| / max(1, |analytic|, |numeric|)``.
    """
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    if params.keys() != analytic.keys():
        raise ShapeError("analytic gradient blocks do not match parameter blocks")
    work = {k: np.array(p, dtype=np.float64, copy=True) for k, p in params.items()}
    worst = 0.0
    for k, p in work.items():
        a = np.asarray(analytic[k], dtype=np.float64)
        if a.shape != p.shape:
            raise ShapeError(f"block {k!r}: gradient shape {a.shape} vs parameter shape {p.shape}")
        flat = p.reshape(-1)
        a_flat = a.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            up = loss_fn(work)
            flat[i] = orig - epsilon
            down = loss_fn(work)
            flat[i] = orig
            numeric = (up - down) / (2.0 * epsilon)
            err = abs(a_flat[i] - numeric) / max(1.0, abs(a_flat[i]), abs(numeric))
            worst = max(worst, err)
    return worst
