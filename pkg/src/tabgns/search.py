"""Alternating weight/gate search over a SuperNet, warm-start fine-tuning,
and the fixed-width and random-width baselines it is compared against."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import supernet as sn
from .data import Splits, TabularDataset, batch_indices
from .errors import ConfigError, DataError, DivergenceError, NumericError, ShapeError
from .grad_core import OPTIMIZERS, OptimizerState, clip_global_norm, he_uniform_layer

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchConfig:
    lr_weights: float = 0.001
    lr_gates: float = 0.05
    tau: float = 1.0
    gate_init: float = -3.0
    max_epochs: int = 300
    patience: int = 20
    batch_size: int = 256
    finetune_epochs: int = 20
    seed: int = 0
    optimizer: str = "adaptive"
    clip_norm: float | None = None
    noise_per_row: bool = False

    def __post_init__(self):
        for name in ("lr_weights", "lr_gates", "tau"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)!r}")
        for name in ("max_epochs", "patience", "batch_size"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not isinstance(self.finetune_epochs, (int, np.integer)) or self.finetune_epochs < 0:
            raise ConfigError(f"finetune_epochs must be a non-negative integer, got {self.finetune_epochs!r}")
        if not np.isfinite(self.gate_init):
            raise ConfigError(f"gate_init must be finite, got {self.gate_init!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {sorted(OPTIMIZERS)}, got {self.optimizer!r}")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise ConfigError(f"clip_norm must be positive when set, got {self.clip_norm!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def derive_seeds(seed: int) -> dict:
    """Independent child seeds for every random stream of one run."""
    names = ("init", "gate_noise", "train_shuffle", "valid_shuffle")
    return {
        name: int(np.random.SeedSequence([int(seed), i]).generate_state(1, np.uint64)[0] >> 1)
        for i, name in enumerate(names)
    }


@dataclass
class SearchResult:
    architecture: sn.Architecture
    supernet: sn.SuperNet
    history: list
    best_epoch: int
    seed: int
    seeds: dict
    search_seconds: float
    clip_events: int = 0
    metrics: dict = field(default_factory=dict)
    initial_expected_size: float = 0.0  # before any update; history rows are end-of-epoch
    initial_open_count: int = 0


@dataclass
class TrainResult:
    architecture: sn.Architecture
    history: list
    best_epoch: int  # -1 when the starting weights were never beaten
    best_valid_loss: float
    seconds: float
    metrics: dict = field(default_factory=dict)


@dataclass
class RandomSearchResult:
    best: TrainResult
    widths: list
    trials: list  # {"widths", "valid_loss", "seed"} per trial
    seconds: float
    metrics: dict = field(default_factory=dict)


def _check_splits(splits: Splits, input_dim: int):
    for name in ("train", "valid"):
        part = getattr(splits, name)
        if len(part) == 0:
            raise DataError(f"{name} split is empty")
        if part.n_features != input_dim:
            raise ShapeError(f"{name} split has {part.n_features} features, model expects {input_dim}")


def _split_loss(layers, masks, dataset: TabularDataset, task: str) -> float:
    preds = sn.mlp_forward(layers, dataset.features, masks)[0]
    return sn.loss(preds, dataset.targets, task)


def _guard(value: float, epoch: int, batch: int | None, what: str):
    if not np.isfinite(value):
        where = f"epoch {epoch}" + ("" if batch is None else f", batch {batch}")
        raise DivergenceError(f"non-finite {what} at {where}", epoch=epoch, batch=batch)


def _apply(step_fn, params, grads, state, epoch, batch):
    try:
        return step_fn(params, grads, state)
    except NumericError as exc:
        raise DivergenceError(f"{exc} at epoch {epoch}, batch {batch}", epoch=epoch, batch=batch) from exc


def search(splits: Splits, space: sn.SearchSpace, config: SearchConfig = SearchConfig(), on_step=None) -> SearchResult:
    """Jointly train SuperNet weights (train split) and gates (valid split).

    Every training batch is paired with a validation batch; the validation
    stream cycles when it is shorter. Each pair performs one weight update
    with the gates frozen and then one gate update with the weights frozen.
    Epoch-end validation loss uses the deterministic mask and drives early
    stopping; the best-epoch snapshot is restored and extracted.

    ``on_step(kind, phase, net)`` is called with ``kind`` in
    ``{"weights", "gates"}`` and ``phase`` in ``{"pre", "post"}`` around
    every update.
    """
    _check_splits(splits, space.input_dim)
    task = space.task
    seeds = derive_seeds(config.seed)
    net = sn.init_supernet(space, seeds["init"], config.gate_init, config.tau)
    noise_rng = np.random.default_rng(seeds["gate_noise"])
    step_fn = OPTIMIZERS[config.optimizer]
    w_state = OptimizerState.for_params(net.weight_params(), config.lr_weights)
    g_state = OptimizerState.for_params({"gates": net.logits}, config.lr_gates)
    train, valid = splits.train, splits.valid

    history = []
    best_loss, best_net, best_epoch = np.inf, net.copy(), 0
    stale = 0
    clip_events = 0
    initial = (sn.expected_size(net), sn.open_count(net))
    started = time.perf_counter()
    for epoch in range(config.max_epochs):
        t0 = time.perf_counter()
        t_batches = batch_indices(len(train), config.batch_size, seeds["train_shuffle"], epoch)
        v_batches = batch_indices(len(valid), config.batch_size, seeds["valid_shuffle"], epoch)
        train_losses = []
        for b, t_idx in enumerate(t_batches):
            # weights step: gates frozen
            if on_step:
                on_step("weights", "pre", net)
            preds, trace = sn.forward(net, train.features[t_idx], "stochastic", noise_rng,
                                      per_row_noise=config.noise_per_row)
            value, d_pred = sn.loss_and_grad(preds, train.targets[t_idx], task)
            _guard(value, epoch, b, "training loss")
            train_losses.append(value)
            grads = sn.mlp_backward(net.layers, trace, d_pred, want_weights=True)
            if config.clip_norm is not None:
                grads, clipped = clip_global_norm(grads, config.clip_norm)
                clip_events += clipped
            params, w_state = _apply(step_fn, net.weight_params(), grads, w_state, epoch, b)
            net.set_weight_params(params)
            if on_step:
                on_step("weights", "post", net)

            # gates step: weights frozen, no lookahead
            if on_step:
                on_step("gates", "pre", net)
            v_idx = v_batches[b % len(v_batches)]
            preds, trace = sn.forward(net, valid.features[v_idx], "stochastic", noise_rng,
                                      per_row_noise=config.noise_per_row)
            value, d_pred = sn.loss_and_grad(preds, valid.targets[v_idx], task)
            _guard(value, epoch, b, "validation loss")
            grads = sn.mlp_backward(net.layers, trace, d_pred, want_weights=False, tau=net.tau, want_gates=True)
            if config.clip_norm is not None:
                grads, clipped = clip_global_norm(grads, config.clip_norm)
                clip_events += clipped
            params, g_state = _apply(step_fn, {"gates": net.logits}, grads, g_state, epoch, b)
            net.logits = params["gates"]
            if on_step:
                on_step("gates", "post", net)

        masks = list(sn.keep_mask(net.logits).astype(np.float64))
        valid_loss = _split_loss(net.layers, masks, valid, task)
        _guard(valid_loss, epoch, None, "epoch validation loss")
        history.append({
            "epoch": epoch,
            "train_loss": float(np.mean(train_losses)),
            "valid_loss": valid_loss,
            "expected_size": sn.expected_size(net),
            "open_count": sn.open_count(net),
            "wall_seconds": time.perf_counter() - t0,
        })
        if valid_loss < best_loss:
            best_loss, best_net, best_epoch = valid_loss, net.copy(), epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
        log.debug("epoch %d valid %.5f size %.1f", epoch, valid_loss, history[-1]["expected_size"])

    arch = sn.extract_architecture(best_net)
    result = SearchResult(
        architecture=arch,
        supernet=best_net,
        history=history,
        best_epoch=best_epoch,
        seed=config.seed,
        seeds=seeds,
        search_seconds=time.perf_counter() - started,
        clip_events=int(clip_events),
        initial_expected_size=initial[0],
        initial_open_count=initial[1],
    )
    if len(splits.test):
        result.metrics = evaluate(arch, splits.test, splits.stats)
    return result


def _train_mlp(arch: sn.Architecture, splits: Splits, config: SearchConfig, epochs: int, seed: int,
               keep_initial: bool) -> TrainResult:
    """Supervised training of an ungated MLP with best-validation snapshots.

    With ``keep_initial`` the starting weights compete as the incumbent, so
    the result is never worse on validation than what was passed in.
    """
    _check_splits(splits, arch.space.input_dim)
    task = arch.space.task
    arch = arch.copy()
    train, valid = splits.train, splits.valid
    step_fn = OPTIMIZERS[config.optimizer]
    state = OptimizerState.for_params(arch.weight_params(), config.lr_weights)
    ones = [1.0] * len(arch.kept)

    best_loss = _split_loss(arch.layers, None, valid, task) if keep_initial else np.inf
    best_arch, best_epoch = arch.copy(), -1
    history, stale = [], 0
    started = time.perf_counter()
    for epoch in range(epochs):
        t0 = time.perf_counter()
        losses = []
        for b, idx in enumerate(batch_indices(len(train), config.batch_size, seed, epoch)):
            preds, inputs, pre, post, gated = sn.mlp_forward(arch.layers, train.features[idx])
            value, d_pred = sn.loss_and_grad(preds, train.targets[idx], task)
            _guard(value, epoch, b, "training loss")
            losses.append(value)
            trace = sn.ForwardTrace("ungated", inputs, pre, post, gated, ones, None, preds)
            grads = sn.mlp_backward(arch.layers, trace, d_pred)
            if config.clip_norm is not None:
                grads, _ = clip_global_norm(grads, config.clip_norm)
            params, state = _apply(step_fn, arch.weight_params(), grads, state, epoch, b)
            arch.set_weight_params(params)
        valid_loss = _split_loss(arch.layers, None, valid, task)
        _guard(valid_loss, epoch, None, "epoch validation loss")
        history.append({
            "epoch": epoch,
            "train_loss": float(np.mean(losses)),
            "valid_loss": valid_loss,
            "expected_size": float(sum(arch.widths)),
            "open_count": int(sum(arch.widths)),
            "wall_seconds": time.perf_counter() - t0,
        })
        if valid_loss < best_loss:
            best_loss, best_arch, best_epoch = valid_loss, arch.copy(), epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    result = TrainResult(best_arch, history, best_epoch, float(best_loss), time.perf_counter() - started)
    if len(splits.test):
        result.metrics = evaluate(best_arch, splits.test, splits.stats)
    return result


def finetune(arch: sn.Architecture, splits: Splits, config: SearchConfig = SearchConfig()) -> TrainResult:
    """Continue training an extracted architecture from its carried weights."""
    seed = derive_seeds(config.seed)["train_shuffle"] + 1
    return _train_mlp(arch, splits, config, config.finetune_epochs, seed, keep_initial=True)


def fresh_architecture(space: sn.SearchSpace, widths, seed: int) -> sn.Architecture:
    rng = np.random.default_rng(seed)
    dims = [space.input_dim] + [int(w) for w in widths] + [space.output_dim]
    layers = [he_uniform_layer(rng, dims[i], dims[i + 1]) for i in range(len(dims) - 1)]
    return sn.full_architecture(space, layers)


def train_fixed(widths, splits: Splits, config: SearchConfig = SearchConfig(), task: str | None = None) -> TrainResult:
    """Train a plain MLP with the given hidden widths from random init."""
    widths = [int(w) for w in widths]
    if not widths or any(w < 1 for w in widths):
        raise ConfigError(f"hidden widths must be positive integers, got {widths}")
    task = task or splits.train.task
    space = sn.SearchSpace(splits.train.n_features, splits.train.output_dim, len(widths), max(widths), task)
    seeds = derive_seeds(config.seed)
    arch = fresh_architecture(space, widths, seeds["init"])
    return _train_mlp(arch, splits, config, config.max_epochs, seeds["train_shuffle"], keep_initial=False)


def random_search_baseline(space: sn.SearchSpace, splits: Splits, config: SearchConfig = SearchConfig(),
                           trials: int = 10) -> RandomSearchResult:
    """Sample hidden-width tuples uniformly, screen each on a tenth of the
    epoch budget, then fully retrain the best one from scratch."""
    if not isinstance(trials, (int, np.integer)) or trials < 1:
        raise ConfigError(f"trials must be a positive integer, got {trials!r}")
    started = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), 9973]))
    candidates = [rng.integers(1, space.max_width + 1, size=space.hidden_layers).tolist() for _ in range(trials)]
    screen_epochs = max(1, config.max_epochs // 10)
    records = []
    for i, widths in enumerate(candidates):
        trial_cfg = replace(config, max_epochs=screen_epochs, seed=config.seed + i)
        res = train_fixed(widths, splits, trial_cfg, task=space.task)
        records.append({"widths": widths, "valid_loss": res.best_valid_loss, "seed": trial_cfg.seed})
    best_i = min(range(trials), key=lambda i: (records[i]["valid_loss"], i))
    widths = candidates[best_i]
    final = train_fixed(widths, splits, replace(config, seed=config.seed + trials), task=space.task)
    out = RandomSearchResult(final, widths, records, time.perf_counter() - started)
    out.metrics = final.metrics
    return out


def evaluate(model, dataset: TabularDataset, stats: dict | None = None) -> dict:
    """Test metrics for an Architecture or a SuperNet (deterministic gates).

    Regression loss is reported in original target units when ``stats``
    carries the target normalization.
    """
    stats = stats or {}
    if isinstance(model, sn.SuperNet):
        arch = sn.extract_architecture(model)

        def run(X):
            return sn.forward(model, X, "deterministic")[0]
    elif isinstance(model, sn.Architecture):
        arch = model

        def run(X):
            return sn.predict(model, X)
    else:
        raise ConfigError(f"cannot evaluate object of type {type(model).__name__}")
    if dataset.n_features != arch.space.input_dim:
        raise ShapeError(f"data has {dataset.n_features} features, model expects {arch.space.input_dim}")
    t0 = time.perf_counter()
    preds = run(dataset.features)
    elapsed = time.perf_counter() - t0
    task = arch.space.task
    out = {
        "widths": arch.widths,
        "params_paper": sn.count_parameters(arch.widths_full, "paper"),
        "params_full": sn.count_parameters(arch.widths_full, "full"),
        "rows": len(dataset),
        "inference_seconds_per_1k": elapsed * 1000.0 / max(1, len(dataset)),
    }
    if task == "regression":
        scale = np.asarray(stats.get("target_scale", 1.0))
        err = (preds - dataset.targets) * scale
        out["loss"] = float(np.mean(err * err))
        out["loss_name"] = "mse"
        out["normalized_loss"] = sn.loss(preds, dataset.targets, task)
    else:
        out["loss"] = sn.loss(preds, dataset.targets, task)
        out["loss_name"] = "cross_entropy"
        out["accuracy"] = sn.accuracy(preds, dataset.targets)
    return out


@dataclass
class PipelineResult:
    search: SearchResult
    finetuned: TrainResult
    metrics: dict


def run_tabgns(splits: Splits, space: sn.SearchSpace, config: SearchConfig = SearchConfig(), on_step=None) -> PipelineResult:
    """Search, extract, warm-start fine-tune and evaluate on the test split."""
    result = search(splits, space, config, on_step=on_step)
    tuned = finetune(result.architecture, splits, config)
    metrics = evaluate(tuned.architecture, splits.test, splits.stats) if len(splits.test) else {}
    return PipelineResult(result, tuned, metrics)
