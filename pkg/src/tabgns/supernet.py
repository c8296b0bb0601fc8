"""The gated SuperNet: the widest MLP of a search space with one stochastic
gate on every hidden neuron, plus extraction of the selected sub-network."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gates as gt
from . import kernels
from .errors import ConfigError, DataError, ShapeError, StateError
from .grad_core import DenseLayer, he_uniform_layer

TASKS = ("regression", "classification")
MODES = ("stochastic", "deterministic", "ungated", "soft")


@dataclass(frozen=True)
class SearchSpace:
    input_dim: int
    output_dim: int
    hidden_layers: int = 5
    max_width: int = 512
    task: str = "regression"

    def __post_init__(self):
        for name in ("input_dim", "output_dim", "hidden_layers", "max_width"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"search space {name} must be a positive integer, got {value!r}")
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")

    @property
    def widths(self) -> list[int]:
        return [self.input_dim] + [self.max_width] * self.hidden_layers + [self.output_dim]

    def to_dict(self) -> dict:
        return {
            "input_dim": int(self.input_dim),
            "output_dim": int(self.output_dim),
            "hidden_layers": int(self.hidden_layers),
            "max_width": int(self.max_width),
            "task": self.task,
        }


@dataclass
class SuperNet:
    space: SearchSpace
    layers: list  # L+1 DenseLayer, input -> hidden ... -> output
    logits: np.ndarray  # (L, W) gate logit per hidden neuron
    tau: float = 1.0
    seed: int | None = None

    def __post_init__(self):
        s = self.space
        self.logits = np.asarray(self.logits, dtype=np.float64)
        if self.logits.shape != (s.hidden_layers, s.max_width):
            raise ShapeError(
                f"expected {s.hidden_layers}x{s.max_width} gate logits, got {self.logits.shape}"
            )
        widths = s.widths
        if len(self.layers) != len(widths) - 1:
            raise ShapeError(f"expected {len(widths) - 1} layers, got {len(self.layers)}")
        for i, layer in enumerate(self.layers):
            if layer.weight.shape != (widths[i + 1], widths[i]):
                raise ShapeError(
                    f"layer {i}: expected weight {(widths[i + 1], widths[i])}, got {layer.weight.shape}"
                )
        if not self.tau > 0:
            raise ConfigError(f"temperature must be positive, got {self.tau}")

    def weight_params(self) -> dict:
        params = {}
        for i, layer in enumerate(self.layers):
            params[f"W{i}"] = layer.weight
            params[f"b{i}"] = layer.bias
        return params

    def set_weight_params(self, params: dict) -> None:
        self.layers = [DenseLayer(params[f"W{i}"], params[f"b{i}"]) for i in range(len(self.layers))]

    def copy(self) -> SuperNet:
        return SuperNet(self.space, [l.copy() for l in self.layers], self.logits.copy(), self.tau, self.seed)


def init_supernet(space: SearchSpace, seed: int, gate_init: float = -3.0, tau: float = 1.0) -> SuperNet:
    if not np.isfinite(gate_init):
        raise ConfigError(f"gate_init must be finite, got {gate_init}")
    rng = np.random.default_rng(seed)
    widths = space.widths
    layers = [he_uniform_layer(rng, widths[i], widths[i + 1]) for i in range(len(widths) - 1)]
    logits = np.full((space.hidden_layers, space.max_width), float(gate_init))
    return SuperNet(space, layers, logits, tau=tau, seed=seed)


def keep_mask(logits: np.ndarray) -> np.ndarray:
    """Boolean (L, W) mask of neurons an extraction keeps.

    A neuron is kept when its logit is >= 0, i.e. its noise-free open
    probability is at least one half. A layer with nothing kept retains its
    single highest-logit neuron (lowest index on ties) so the network stays
    connected.
    """
    mask = np.asarray(logits) >= 0.0
    for l in np.flatnonzero(~mask.any(axis=1)):
        mask[l, int(np.argmax(logits[l]))] = True
    return mask


@dataclass
class ForwardTrace:
    mode: str
    inputs: list  # input to each layer (X, h1, ..., hL)
    pre: list  # z per hidden layer
    post: list  # ReLU(z) per hidden layer
    gated: list  # a * mask per hidden layer
    masks: list  # mask actually multiplied in, per hidden layer
    sample: gt.GateSample | None
    predictions: np.ndarray
    layer_shapes: tuple = field(default=())


def _check_features(X, input_dim) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != input_dim:
        raise ShapeError(f"expected a batch with {input_dim} feature columns, got shape {X.shape}")
    return X


def mlp_forward(layers, X, masks=None):
    """Plain or masked MLP forward. Returns ``(predictions, inputs, pre, post, gated)``."""
    h = X
    inputs, pre, post, gated = [], [], [], []
    for i, layer in enumerate(layers[:-1]):
        inputs.append(h)
        z, a, h = kernels.hidden_forward(h, layer.weight, layer.bias, None if masks is None else masks[i])
        pre.append(z)
        post.append(a)
        gated.append(h)
    inputs.append(h)
    return kernels.linear(h, layers[-1].weight, layers[-1].bias), inputs, pre, post, gated


def forward(net: SuperNet, X, mode: str = "stochastic", rng: np.random.Generator | None = None,
            noise=None, per_row_noise: bool = False):
    """Gated forward pass over a batch ``X`` of shape (rows, input_dim).

    ``mode`` picks the gate mask: ``stochastic`` samples hard gates with
    Gumbel noise, ``soft`` multiplies by the relaxed probabilities instead
    (a test utility), ``deterministic`` uses the extraction mask and
    ``ungated`` opens everything. ``noise`` is an optional ``(o1, o2)`` pair
    that freezes the Gumbel draws. Returns ``(predictions, trace)``.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown forward mode {mode!r}")
    X = _check_features(X, net.space.input_dim)
    sample = None
    if mode in ("stochastic", "soft"):
        if noise is not None:
            o1, o2 = noise
            sample = gt.gates_from_noise(net.logits, np.asarray(o1), np.asarray(o2), net.tau)
        else:
            if rng is None:
                raise ConfigError(f"{mode} forward needs a random generator or frozen noise")
            rows = X.shape[0] if per_row_noise else None
            sample = gt.sample_gates(net.logits, net.tau, rng, rows=rows)
        full = sample.z if mode == "stochastic" else sample.p
        if full.ndim == 3:
            masks = [full[:, l, :] for l in range(net.space.hidden_layers)]
        else:
            masks = list(full)
    elif mode == "deterministic":
        masks = list(keep_mask(net.logits).astype(np.float64))
    else:
        masks = None
    preds, inputs, pre, post, gated = mlp_forward(net.layers, X, masks)
    if masks is None:
        masks = [1.0] * net.space.hidden_layers
    trace = ForwardTrace(mode, inputs, pre, post, gated, masks, sample, preds,
                         tuple(l.weight.shape for l in net.layers))
    return preds, trace


def _check_targets(pred, targets, task):
    if task == "regression":
        targets = np.asarray(targets, dtype=np.float64)
        if targets.ndim == 1:
            targets = targets.reshape(-1, 1)
        if targets.shape != pred.shape:
            raise ShapeError(f"targets shape {targets.shape} does not match predictions {pred.shape}")
        return targets
    if task == "classification":
        targets = np.asarray(targets)
        if targets.ndim != 1 or targets.shape[0] != pred.shape[0]:
            raise ShapeError(f"expected {pred.shape[0]} class indices, got shape {targets.shape}")
        if not np.issubdtype(targets.dtype, np.integer):
            if not np.all(np.equal(np.mod(targets, 1), 0)):
                raise DataError("class targets must be integers")
            targets = targets.astype(np.int64)
        if targets.size and (targets.min() < 0 or targets.max() >= pred.shape[1]):
            raise DataError(f"class index out of range [0, {pred.shape[1]})")
        return targets
    raise ConfigError(f"task must be one of {TASKS}, got {task!r}")


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss_and_grad(pred, targets, task: str):
    """Mean task loss over the batch and its gradient w.r.t. ``pred``."""
    pred = np.asarray(pred, dtype=np.float64)
    targets = _check_targets(pred, targets, task)
    n = pred.shape[0]
    if task == "regression":
        diff = pred - targets
        return float(np.mean(diff * diff)), 2.0 * diff / diff.size
    logp = _log_softmax(pred)
    rows = np.arange(n)
    value = float(-logp[rows, targets].mean())
    d = np.exp(logp)
    d[rows, targets] -= 1.0
    return value, d / n


def loss(pred, targets, task: str) -> float:
    return loss_and_grad(pred, targets, task)[0]


def accuracy(pred, targets) -> float:
    targets = np.asarray(targets)
    return float(np.mean(np.argmax(pred, axis=1) == targets))


def mlp_backward(layers, trace: ForwardTrace, d_pred, want_weights=True, tau=1.0, want_gates=False):
    """Reverse pass over a (possibly gated) forward trace.

    The hard mask scales the signal reaching each neuron's weights. Gate
    logits receive ``sum_rows(d_h * a) * p(1-p)/tau``.
    """
    grads = {}
    gate_grads = []
    last = len(layers) - 1
    dW, db, d_h = kernels.linear_backward(d_pred, trace.inputs[last], layers[last].weight, True)
    if want_weights:
        grads[f"W{last}"], grads[f"b{last}"] = dW, db
    for i in range(last - 1, -1, -1):
        mask = trace.masks[i]
        dW, db, d_h_prev, gate = kernels.hidden_backward(
            d_h, trace.inputs[i], layers[i].weight, trace.pre[i], trace.post[i],
            None if np.ndim(mask) == 0 else mask,
            need_dx=i > 0, need_wgrad=want_weights, want_gate=want_gates,
        )
        if want_gates:
            p = trace.sample.p
            if p.ndim == 3:
                gate_grads.append(gt.gate_backward(gate, p[:, i, :], tau).sum(axis=0))
            else:
                gate_grads.append(gt.gate_backward(gate, p[i], tau))
        if want_weights:
            grads[f"W{i}"], grads[f"b{i}"] = dW, db
        d_h = d_h_prev
    if want_gates:
        grads["gates"] = np.stack(gate_grads[::-1])
    return grads


def backward(net: SuperNet, trace: ForwardTrace, targets, which: str = "weights"):
    """Gradients of the mean task loss for one parameter group.

    ``which`` is ``"weights"`` (returns ``W{i}``/``b{i}`` blocks) or
    ``"gates"`` (returns a single ``"gates"`` block shaped like the logits).
    """
    if which not in ("weights", "gates"):
        raise ConfigError(f"which must be 'weights' or 'gates', got {which!r}")
    if trace.layer_shapes != tuple(l.weight.shape for l in net.layers):
        raise StateError("forward trace was produced by a network with different layer shapes")
    if which == "gates" and trace.mode not in ("stochastic", "soft"):
        raise StateError(f"gate gradients need a stochastic or soft trace, got mode {trace.mode!r}")
    _, d_pred = loss_and_grad(trace.predictions, targets, net.space.task)
    return mlp_backward(net.layers, trace, d_pred, want_weights=which == "weights",
                        tau=net.tau, want_gates=which == "gates")


def expected_size(net: SuperNet) -> float:
    return float(np.sum(gt.sigmoid(net.logits)))


def open_count(net: SuperNet) -> int:
    return int(np.sum(net.logits >= 0.0))


@dataclass
class Architecture:
    space: SearchSpace
    kept: list  # sorted int arrays, one per hidden layer
    layers: list

    def __post_init__(self):
        self.kept = [np.asarray(k, dtype=np.int64) for k in self.kept]
        if len(self.kept) != len(self.layers) - 1:
            raise ShapeError(f"{len(self.kept)} kept-index lists for {len(self.layers)} layers")
        for l, k in enumerate(self.kept):
            if k.size == 0:
                raise ShapeError(f"hidden layer {l} keeps no neurons")
        dims = self.widths_full
        for i, layer in enumerate(self.layers):
            if layer.weight.shape != (dims[i + 1], dims[i]):
                raise ShapeError(f"layer {i}: expected weight {(dims[i + 1], dims[i])}, got {layer.weight.shape}")

    @property
    def widths(self) -> list[int]:
        return [int(k.size) for k in self.kept]

    @property
    def widths_full(self) -> list[int]:
        return [self.space.input_dim] + self.widths + [self.space.output_dim]

    def weight_params(self) -> dict:
        params = {}
        for i, layer in enumerate(self.layers):
            params[f"W{i}"] = layer.weight
            params[f"b{i}"] = layer.bias
        return params

    def set_weight_params(self, params: dict) -> None:
        self.layers = [DenseLayer(params[f"W{i}"], params[f"b{i}"]) for i in range(len(self.layers))]

    def copy(self) -> Architecture:
        return Architecture(self.space, [k.copy() for k in self.kept], [l.copy() for l in self.layers])


def extract_architecture(net: SuperNet) -> Architecture:
    mask = keep_mask(net.logits)
    kept = [np.flatnonzero(row) for row in mask]
    layers = []
    prev = None
    for i, layer in enumerate(net.layers):
        W, b = layer.weight, layer.bias
        if i < len(kept):
            W, b = W[kept[i]], b[kept[i]]
        if prev is not None:
            W = W[:, prev]
        layers.append(DenseLayer(W.copy(), b.copy()))
        prev = kept[i] if i < len(kept) else None
    return Architecture(net.space, kept, layers)


def full_architecture(space: SearchSpace, layers) -> Architecture:
    """Wrap an ungated MLP whose hidden layers are all fully kept."""
    kept = [np.arange(layer.out_dim) for layer in layers[:-1]]
    return Architecture(space, kept, list(layers))


def predict(arch: Architecture, X) -> np.ndarray:
    X = _check_features(X, arch.space.input_dim)
    return mlp_forward(arch.layers, X)[0]


def count_parameters(widths, convention: str = "paper") -> int:
    """Parameter count of an MLP given all layer sizes, input and output included.

    ``paper`` counts only weights between consecutive hidden layers (so five
    hidden layers of 512 give 4 * 512**2). ``full`` counts every weight and
    bias from input to output.
    """
    widths = [int(w) for w in widths]
    if not widths or any(w < 1 for w in widths):
        raise ConfigError(f"widths must be non-empty positive integers, got {widths}")
    if convention == "paper":
        hidden = widths[1:-1]
        return sum(a * b for a, b in zip(hidden, hidden[1:]))
    if convention == "full":
        return sum((a + 1) * b for a, b in zip(widths, widths[1:]))
    raise ConfigError(f"unknown parameter-count convention {convention!r}")
