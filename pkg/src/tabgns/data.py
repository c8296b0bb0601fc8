"""Tabular datasets: CSV ingestion, splitting, z-score normalization,
batching and synthetic teacher-student generation."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DataError, ParseError
from .grad_core import DenseLayer, he_uniform_layer
from .supernet import TASKS, mlp_forward

STD_FLOOR = 1e-12
DEFAULT_FRACTIONS = (0.7, 0.15, 0.15)


@dataclass
class TabularDataset:
    features: np.ndarray  # (n, d) float64
    targets: np.ndarray  # (n, k) float64 for regression, (n,) int64 for classification
    task: str
    feature_names: list
    target_names: list = field(default_factory=list)
    n_classes: int | None = None
    metadata: dict = field(default_factory=dict)
    allow_missing: bool = False

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {self.features.shape}")
        if self.task == "regression":
            self.targets = np.asarray(self.targets, dtype=np.float64)
            if self.targets.ndim == 1:
                self.targets = self.targets.reshape(-1, 1)
            if not np.all(np.isfinite(self.targets)):
                raise DataError("regression targets contain non-finite values")
        else:
            self.targets = np.asarray(self.targets, dtype=np.int64)
            if self.targets.ndim != 1:
                raise DataError("classification targets must be a vector of class indices")
            if self.n_classes is None:
                self.n_classes = int(self.targets.max()) + 1 if self.targets.size else 1
            if self.targets.size and (self.targets.min() < 0 or self.targets.max() >= self.n_classes):
                raise DataError(f"class targets must lie in [0, {self.n_classes})")
        if self.targets.shape[0] != self.features.shape[0]:
            raise DataError(
                f"{self.features.shape[0]} feature rows but {self.targets.shape[0]} target rows"
            )
        if len(self.feature_names) != self.features.shape[1]:
            raise DataError(f"{len(self.feature_names)} feature names for {self.features.shape[1]} columns")
        finite = np.isfinite(self.features)
        if not self.allow_missing and not np.all(finite):
            raise DataError("features contain non-finite values")
        if self.allow_missing and np.any(np.isinf(self.features)):
            raise DataError("features contain infinite values")

    def __len__(self):
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def output_dim(self) -> int:
        return self.targets.shape[1] if self.task == "regression" else int(self.n_classes)

    def take(self, rows) -> TabularDataset:
        return replace(self, features=self.features[rows], targets=self.targets[rows])


@dataclass
class Splits:
    train: TabularDataset
    valid: TabularDataset
    test: TabularDataset
    fractions: tuple = DEFAULT_FRACTIONS
    split_seed: int = 0
    rows: dict = field(default_factory=dict)  # split name -> source row indices
    stats: dict = field(default_factory=dict)  # normalization statistics


# ---------------------------------------------------------------- CSV I/O


def _where(path, line: int) -> str:
    # line counts the header; data rows are numbered from 1
    return f"{path}: line {line} (data row {line - 1})"


def _parse_float(cell: str):
    cell = cell.strip()
    if cell == "" or cell.lower() in ("nan", "na", "null", "none", "?"):
        return None
    return float(cell)


def _resolve_columns(header, spec, kind):
    out = []
    for item in spec:
        if isinstance(item, (int, np.integer)) or (isinstance(item, str) and item.lstrip("-").isdigit() and item not in header):
            idx = int(item)
            if not -len(header) <= idx < len(header):
                raise ConfigError(f"{kind} column index {idx} out of range for {len(header)} columns")
            out.append(idx % len(header))
        elif item in header:
            out.append(header.index(item))
        else:
            raise ConfigError(f"unknown {kind} column {item!r}")
    return out


def load_csv(path, target_columns, task: str = "regression", categorical=(), impute_mean: bool = False) -> TabularDataset:
    """Read a headed, comma-separated file into a dataset.

    Declared categorical feature columns are one-hot encoded with categories
    in first-appearance order. Missing feature cells raise unless
    ``impute_mean`` is set, in which case they stay NaN until
    :func:`normalize` fills them from train-split means.
    """
    if task not in TASKS:
        raise ConfigError(f"task must be one of {TASKS}, got {task!r}")
    if isinstance(target_columns, (str, int)):
        target_columns = [target_columns]
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r and any(c.strip() for c in r)]
    if not body:
        raise DataError(f"{path}: no data rows")
    targets = _resolve_columns(header, target_columns, "target")
    cats = set(_resolve_columns(header, categorical, "categorical"))
    if task == "classification" and len(targets) != 1:
        raise ConfigError("classification needs exactly one target column")
    for lineno, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise ParseError(f"{_where(path, lineno)}: expected {len(header)} fields, got {len(r)}")

    columns, names, category_maps = [], [], {}
    for c, name in enumerate(header):
        if c in targets:
            continue
        if c in cats:
            levels = list(dict.fromkeys(r[c].strip() for r in body))
            if "" in levels:
                row = next(i for i, r in enumerate(body, start=2) if not r[c].strip())
                raise DataError(f"{_where(path, row)}: missing value in categorical column {name!r}")
            category_maps[name] = levels
            codes = {v: i for i, v in enumerate(levels)}
            onehot = np.zeros((len(body), len(levels)))
            for i, r in enumerate(body):
                onehot[i, codes[r[c].strip()]] = 1.0
            columns.extend(onehot.T)
            names.extend(f"{name}={v}" for v in levels)
            continue
        col = np.empty(len(body))
        for i, r in enumerate(body):
            try:
                value = _parse_float(r[c])
            except ValueError:
                raise ParseError(f"{_where(path, i + 2)}, column {name!r}: cannot parse {r[c]!r} as a number") from None
            if value is None or not math.isfinite(value):
                if not impute_mean or (value is not None and math.isinf(value)):
                    raise DataError(f"{_where(path, i + 2)}: missing or non-finite value in column {name!r}")
                value = math.nan
            col[i] = value
        columns.append(col)
        names.append(name)
    features = np.column_stack(columns) if columns else np.zeros((len(body), 0))

    metadata = {"source": str(path), "category_maps": category_maps}
    target_names = [header[t] for t in targets]
    if task == "regression":
        y = np.empty((len(body), len(targets)))
        for j, t in enumerate(targets):
            for i, r in enumerate(body):
                try:
                    value = _parse_float(r[t])
                except ValueError:
                    raise ParseError(f"{_where(path, i + 2)}, target {header[t]!r}: cannot parse {r[t]!r}") from None
                if value is None or not math.isfinite(value):
                    raise DataError(f"{_where(path, i + 2)}: missing value in target column {header[t]!r}")
                y[i, j] = value
        return TabularDataset(features, y, task, names, target_names, metadata=metadata, allow_missing=impute_mean)

    raw = [r[targets[0]].strip() for r in body]
    if any(v == "" for v in raw):
        row = raw.index("") + 2
        raise DataError(f"{_where(path, row)}: missing value in target column {target_names[0]!r}")
    try:
        numeric = [float(v) for v in raw]
        labels = sorted(set(numeric))
        lookup = {v: i for i, v in enumerate(labels)}
        y = np.array([lookup[v] for v in numeric], dtype=np.int64)
        labels = [repr(v) if v != int(v) else str(int(v)) for v in labels]
    except ValueError:
        labels = list(dict.fromkeys(raw))
        lookup = {v: i for i, v in enumerate(labels)}
        y = np.array([lookup[v] for v in raw], dtype=np.int64)
    metadata["class_labels"] = labels
    return TabularDataset(features, y, task, names, target_names, n_classes=len(labels),
                          metadata=metadata, allow_missing=impute_mean)


def save_csv(dataset: TabularDataset, path) -> None:
    """Write features and targets back out; floats use their shortest exact repr."""
    target_names = dataset.target_names or (
        [f"target{j}" for j in range(dataset.targets.shape[1])] if dataset.task == "regression" else ["target"]
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(dataset.feature_names) + list(target_names))
        for x, y in zip(dataset.features, dataset.targets):
            ys = [repr(float(v)) for v in y] if dataset.task == "regression" else [str(int(y))]
            writer.writerow([repr(float(v)) for v in x] + ys)


# ------------------------------------------------------- split & normalize


def split(dataset: TabularDataset, fractions=DEFAULT_FRACTIONS, seed: int = 0) -> Splits:
    """Shuffle rows with ``seed`` and cut them into train/valid/test.

    Valid and test sizes are ``floor(n * fraction)``; train takes the rest.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"fractions must be three positive numbers summing to 1, got {fractions}")
    n = len(dataset)
    n_valid = int(math.floor(n * fractions[1] + 1e-9))
    n_test = int(math.floor(n * fractions[2] + 1e-9))
    n_train = n - n_valid - n_test
    if n < 3 or min(n_train, n_valid, n_test) < 1:
        raise DataError(f"{n} rows are too few for non-empty splits with fractions {fractions}")
    perm = np.random.default_rng(seed).permutation(n)
    rows = {
        "train": perm[:n_train],
        "valid": perm[n_train:n_train + n_valid],
        "test": perm[n_train + n_valid:],
    }
    return Splits(
        train=dataset.take(rows["train"]),
        valid=dataset.take(rows["valid"]),
        test=dataset.take(rows["test"]),
        fractions=fractions,
        split_seed=seed,
        rows=rows,
    )


def normalize(splits: Splits) -> Splits:
    """Z-score features (and regression targets) with train-split statistics.

    Near-constant columns are only centered. Missing feature cells are
    filled with the train mean first.
    """
    train = splits.train
    if len(train) == 0:
        raise DataError("cannot normalize with an empty train split")
    mean = np.nanmean(train.features, axis=0) if train.features.size else np.zeros(0)
    if np.any(np.isnan(mean)):
        bad = [train.feature_names[j] for j in np.flatnonzero(np.isnan(mean))]
        raise DataError(f"columns {bad} have no observed values in the train split")
    filled = [np.where(np.isnan(s.features), mean, s.features) for s in (splits.train, splits.valid, splits.test)]
    std = filled[0].std(axis=0)
    scale = np.where(std < STD_FLOOR, 1.0, std)
    stats = {"feature_mean": mean, "feature_scale": scale}
    out = []
    if train.task == "regression":
        t_mean = train.targets.mean(axis=0)
        t_std = train.targets.std(axis=0)
        t_scale = np.where(t_std < STD_FLOOR, 1.0, t_std)
        stats.update(target_mean=t_mean, target_scale=t_scale)
    for s, f in zip((splits.train, splits.valid, splits.test), filled):
        targets = s.targets
        if s.task == "regression":
            targets = (targets - stats["target_mean"]) / stats["target_scale"]
        out.append(replace(s, features=(f - mean) / scale, targets=targets, allow_missing=False))
    return Splits(out[0], out[1], out[2], splits.fractions, splits.split_seed, splits.rows, stats)


def batch_indices(n: int, batch_size: int, shuffle_seed: int, epoch_index: int) -> list:
    if batch_size < 1:
        raise ConfigError(f"batch size must be at least 1, got {batch_size}")
    perm = np.random.default_rng([shuffle_seed, epoch_index]).permutation(n)
    return [perm[i:i + batch_size] for i in range(0, n, batch_size)]


def batches(dataset: TabularDataset, batch_size: int, shuffle_seed: int, epoch_index: int):
    """Shuffled ``(X, Y)`` batches; the last one may be short."""
    return [
        (dataset.features[idx], dataset.targets[idx])
        for idx in batch_indices(len(dataset), batch_size, shuffle_seed, epoch_index)
    ]


# --------------------------------------------------------------- synthetic


def teacher_layers(input_dim: int, teacher_widths, seed: int, output_dim: int = 1) -> list:
    rng = np.random.default_rng(seed)
    dims = [input_dim] + list(teacher_widths) + [output_dim]
    layers = []
    for i in range(len(dims) - 1):
        layer = he_uniform_layer(rng, dims[i], dims[i + 1])
        layers.append(DenseLayer(layer.weight, rng.uniform(-0.1, 0.1, size=dims[i + 1])))
    return layers


def make_teacher_student(input_dim: int, teacher_widths, n_rows: int, noise_std: float, seed: int) -> TabularDataset:
    """Regression data from a frozen random ReLU teacher plus Gaussian noise.

    The teacher's layers are kept in ``metadata["teacher_layers"]``.
    """
    teacher_widths = [int(w) for w in teacher_widths]
    if not teacher_widths or any(w < 1 for w in teacher_widths):
        raise ConfigError(f"teacher widths must be non-empty positive integers, got {teacher_widths}")
    if input_dim < 1 or n_rows < 1 or noise_std < 0:
        raise ConfigError("input_dim and n_rows must be positive and noise_std non-negative")
    seeds = np.random.SeedSequence(seed).spawn(3)
    layers = teacher_layers(input_dim, teacher_widths, np.random.default_rng(seeds[0]).integers(2**63))
    X = np.random.default_rng(seeds[1]).standard_normal((n_rows, input_dim))
    clean = mlp_forward(layers, X)[0]
    noise = np.random.default_rng(seeds[2]).standard_normal(clean.shape) * noise_std
    metadata = {
        "source": "teacher-student",
        "teacher": {"input_dim": input_dim, "widths": teacher_widths, "noise_std": noise_std, "seed": seed},
        "teacher_layers": layers,
    }
    return TabularDataset(X, clean + noise, "regression", [f"x{j}" for j in range(input_dim)], ["y"],
                          metadata=metadata)


# ---------------------------------------------------------------- metadata


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, DenseLayer):
        return {"weight": obj.weight.tolist(), "bias": obj.bias.tolist()}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def dataset_metadata(dataset: TabularDataset, splits: Splits | None = None) -> dict:
    meta = {
        "task": dataset.task,
        "n_rows": len(dataset),
        "feature_names": list(dataset.feature_names),
        "target_names": list(dataset.target_names),
        "n_classes": dataset.n_classes,
        **_jsonable(dataset.metadata),
    }
    if splits is not None:
        meta["split"] = {
            "fractions": list(splits.fractions),
            "seed": int(splits.split_seed),
            "sizes": {k: int(len(v)) for k, v in splits.rows.items()},
        }
        meta["normalization"] = _jsonable(splits.stats)
    return meta


def write_metadata(meta: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
