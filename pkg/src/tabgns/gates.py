"""Per-neuron stochastic gates.

Each gate has one logit ``g`` for its "open" category; the "closed"
category is pinned at zero. Sampling adds independent standard Gumbel noise
to both categories, so the two-way softmax collapses to a sigmoid:

    p = sigmoid((g + o1 - o2) / tau)

The forward pass uses the hard value ``p >= 0.5`` and the backward pass
routes gradients through ``p`` (straight-through).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

P_CLAMP = 1e-12


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def sample_gumbel(rng: np.random.Generator, n) -> np.ndarray:
    """Draw standard Gumbel variates ``-log(-log(u))``; ``n`` may be a shape."""
    if np.ndim(n) == 0 and int(n) < 1:
        raise ConfigError(f"sample count must be at least 1, got {n}")
    u = rng.random(n)
    # rng.random is on [0, 1); lift exact zeros into the open interval
    u = np.maximum(u, np.finfo(np.float64).tiny)
    return -np.log(-np.log(u))


def _check_tau(tau):
    if not tau > 0:
        raise ConfigError(f"temperature must be positive, got {tau}")


def gate_soft_prob(g, o1, o2, tau=1.0):
    _check_tau(tau)
    p = sigmoid((np.asarray(g, dtype=np.float64) + o1 - o2) / tau)
    return np.clip(p, P_CLAMP, 1.0 - P_CLAMP)


def gate_hard(p):
    # tie at exactly 0.5 opens the gate
    return (np.asarray(p) >= 0.5).astype(np.float64)


def gate_backward(d_z, p, tau=1.0):
    """Straight-through gradient of the loss w.r.t. the gate logit."""
    _check_tau(tau)
    p = np.asarray(p, dtype=np.float64)
    return np.asarray(d_z, dtype=np.float64) * p * (1.0 - p) / tau


def deterministic_open_prob(g):
    return sigmoid(g)


@dataclass
class GateSample:
    o1: np.ndarray
    o2: np.ndarray
    p: np.ndarray
    z: np.ndarray
    tau: float


def sample_gates(logits: np.ndarray, tau: float, rng: np.random.Generator, rows: int | None = None) -> GateSample:
    """Sample every gate in ``logits`` once.

    With ``rows`` set, each of that many batch rows gets its own noise and
    the arrays gain a leading row axis.
    """
    shape = logits.shape if rows is None else (rows,) + logits.shape
    o1 = sample_gumbel(rng, shape)
    o2 = sample_gumbel(rng, shape)
    return gates_from_noise(logits, o1, o2, tau)


def gates_from_noise(logits, o1, o2, tau: float) -> GateSample:
    p = gate_soft_prob(logits, o1, o2, tau)
    return GateSample(o1=o1, o2=o2, p=p, z=gate_hard(p), tau=tau)
