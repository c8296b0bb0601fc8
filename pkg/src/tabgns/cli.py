"""Command-line front end.

    tabgns search|baseline|evaluate|report [--config FILE] [--seed N] [--out DIR]
                                           [--section.key=value ...] [PATH ...]

Configuration is a JSON document with the sections below; command-line
``--section.key=value`` flags override the file, which overrides defaults.
Values on the command line are read as JSON when they parse (numbers,
booleans, null, lists) and as plain strings otherwise.

Exit codes: 0 ok, 1 internal error, 2 configuration or usage, 3 data or
shape, 4 numeric divergence, 5 checkpoint integrity, 6 report schema.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import os
import statistics
import sys
import traceback
from dataclasses import fields

import numpy as np

from . import checkpoint
from . import data as tdata
from . import supernet as sn
from .errors import ConfigError, IntegrityError, ReportSchemaError, TabGNSError
from .search import (
    SearchConfig,
    derive_seeds,
    evaluate,
    finetune,
    random_search_baseline,
    search,
    train_fixed,
)

log = logging.getLogger("tabgns")

REPORT_SCHEMA = "tabgns-report/1"
METRICS_SCHEMA = "tabgns-metrics/1"
METHODS = ("tabgns", "large-mlp", "random-search")
HISTORY_COLUMNS = ("epoch", "train_loss", "valid_loss", "expected_size", "open_count", "wall_seconds")
TIMING_KEYS = ("inference_seconds_per_1k",)

_SEARCH_DEFAULTS = {f.name: f.default for f in fields(SearchConfig) if f.name != "seed"}

DEFAULTS = {
    "data": {
        "source": None,  # "synthetic" or "csv"; required
        "path": None,
        "target_columns": ["y"],
        "task": "regression",
        "categorical": [],
        "impute_mean": False,
        "input_dim": 10,
        "teacher_widths": [8, 8],
        "n_rows": 20000,
        "noise_std": 0.1,
        "seed": None,  # derived from run.seed when null
        "fractions": list(tdata.DEFAULT_FRACTIONS),
        "split_seed": None,  # derived from run.seed when null
    },
    "space": {"hidden_layers": 5, "max_width": 512},
    "search": dict(_SEARCH_DEFAULTS),
    "run": {
        "method": "tabgns",
        "seed": 0,
        "out": None,  # required for search and baseline
        "trials": 10,
        "include_timings": False,
        "log_level": "warning",
    },
    "evaluate": {"checkpoint": None, "split": "test"},
    "report": {"timings": False},
}


# ------------------------------------------------------------------ config


def _coerce(text: str):
    try:
        return json.loads(text)
    except ValueError:
        return text


def apply_overrides(config: dict, overrides: dict) -> dict:
    """Merge ``{"section.key": value}`` pairs into a deep copy of ``config``."""
    out = copy.deepcopy(config)
    for dotted, value in overrides.items():
        section, _, key = dotted.partition(".")
        if not key or section not in DEFAULTS:
            raise ConfigError(f"unknown setting {dotted!r}; expected section.key with section in {sorted(DEFAULTS)}")
        if key not in DEFAULTS[section]:
            raise ConfigError(f"unknown setting {dotted!r}; {section} accepts {sorted(DEFAULTS[section])}")
        out[section][key] = value
    return out


def _merge_file(config: dict, doc) -> dict:
    if not isinstance(doc, dict):
        raise ConfigError("configuration file must hold a JSON object")
    flat = {}
    for section, body in doc.items():
        if not isinstance(body, dict):
            raise ConfigError(f"configuration section {section!r} must be an object")
        for key, value in body.items():
            flat[f"{section}.{key}"] = value
    return apply_overrides(config, flat)


def validate(config: dict) -> dict:
    """Check types and ranges; returns the config unchanged or raises ConfigError."""
    d, r = config["data"], config["run"]
    if d["source"] not in (None, "synthetic", "csv"):
        raise ConfigError(f"data.source must be 'synthetic' or 'csv', got {d['source']!r}")
    if d["source"] == "csv" and not d["path"]:
        raise ConfigError("data.path is required when data.source is 'csv'")
    if d["task"] not in sn.TASKS:
        raise ConfigError(f"data.task must be one of {sn.TASKS}, got {d['task']!r}")
    if r["method"] not in METHODS:
        raise ConfigError(f"run.method must be one of {METHODS}, got {r['method']!r}")
    for section, key in (("run", "seed"), ("run", "trials"), ("space", "hidden_layers"), ("space", "max_width"),
                         ("data", "input_dim"), ("data", "n_rows")):
        value = config[section][key]
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
    for section, key in (("data", "seed"), ("data", "split_seed")):
        value = config[section][key]
        if value is not None and (isinstance(value, bool) or not isinstance(value, int)):
            raise ConfigError(f"{section}.{key} must be an integer or null, got {value!r}")
    if r["seed"] < 0:
        raise ConfigError("run.seed must be non-negative")
    if r["trials"] < 1:
        raise ConfigError("run.trials must be at least 1")
    for section, key in (("run", "include_timings"), ("data", "impute_mean"), ("report", "timings")):
        if not isinstance(config[section][key], bool):
            raise ConfigError(f"{section}.{key} must be true or false")
    if config["evaluate"]["split"] not in ("train", "valid", "test"):
        raise ConfigError("evaluate.split must be train, valid or test")
    if not isinstance(d["fractions"], list) or len(d["fractions"]) != 3:
        raise ConfigError("data.fractions must be a list of three numbers")
    search_config(config)
    sn.SearchSpace(1, 1, config["space"]["hidden_layers"], config["space"]["max_width"], d["task"])
    return config


def resolve(file_doc: dict | None = None, overrides: dict | None = None) -> dict:
    """Defaults, then the file, then flag overrides; validated."""
    config = copy.deepcopy(DEFAULTS)
    if file_doc:
        config = _merge_file(config, file_doc)
    if overrides:
        config = apply_overrides(config, overrides)
    return validate(config)


def serialize(config: dict) -> str:
    return json.dumps(config, indent=2, sort_keys=True) + "\n"


def parse(text: str) -> dict:
    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
    return resolve(doc)


def search_config(config: dict) -> SearchConfig:
    kwargs = dict(config["search"])
    try:
        return SearchConfig(seed=config["run"]["seed"], **kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad search settings: {exc}") from exc


def run_seeds(config: dict) -> dict:
    """Every seed a run uses, derived from ``run.seed`` unless pinned."""
    seed = config["run"]["seed"]
    derived = derive_seeds(seed)
    d = config["data"]

    def child(tag):
        return int(np.random.SeedSequence([seed, tag]).generate_state(1, np.uint64)[0] >> 1)

    return {
        "run": seed,
        "data": d["seed"] if d["seed"] is not None else child(101),
        "split": d["split_seed"] if d["split_seed"] is not None else child(102),
        **derived,
    }


# -------------------------------------------------------------------- data


def load_dataset(config: dict, seeds: dict) -> tdata.TabularDataset:
    d = config["data"]
    if d["source"] is None:
        raise ConfigError("no dataset configured; set data.source to 'synthetic' or 'csv'")
    if d["source"] == "synthetic":
        if d["task"] != "regression":
            raise ConfigError("the synthetic teacher-student source produces regression data only")
        return tdata.make_teacher_student(d["input_dim"], d["teacher_widths"], d["n_rows"], d["noise_std"],
                                          seeds["data"])
    return tdata.load_csv(d["path"], d["target_columns"], d["task"], d["categorical"], d["impute_mean"])


def prepare(config: dict):
    seeds = run_seeds(config)
    dataset = load_dataset(config, seeds)
    splits = tdata.normalize(tdata.split(dataset, config["data"]["fractions"], seeds["split"]))
    space = sn.SearchSpace(dataset.n_features, dataset.output_dim, config["space"]["hidden_layers"],
                           config["space"]["max_width"], dataset.task)
    return seeds, dataset, splits, space


def portable(config: dict) -> dict:
    """The config minus where results are written, which is not an input."""
    out = copy.deepcopy(config)
    out["run"]["out"] = None
    return out


def input_hash(config: dict, dataset: tdata.TabularDataset) -> str:
    h = hashlib.sha256()
    h.update(serialize(portable(config)).encode("utf-8"))
    h.update(np.ascontiguousarray(dataset.features, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(dataset.targets).astype("<f8").tobytes())
    return "sha256:" + h.hexdigest()


# ----------------------------------------------------------------- outputs


def _clean_float(x):
    if x is None:
        return None
    x = float(x)
    return x if np.isfinite(x) else None


def _strip_timings(metrics: dict, timings: dict, prefix: str, keep: bool) -> dict:
    out = {}
    for k, v in metrics.items():
        if k in TIMING_KEYS:
            timings[f"{prefix}.{k}"] = v
            out[k] = v if keep else None
        else:
            out[k] = v
    return out


def write_history(path, history: list, keep_timings: bool) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for rec in history:
            row = []
            for col in HISTORY_COLUMNS:
                v = rec[col]
                if col == "wall_seconds" and not keep_timings:
                    row.append("")
                elif isinstance(v, float):
                    row.append(repr(v))
                else:
                    row.append(str(v))
            w.writerow(row)


def _write_json(path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(tdata._jsonable(doc), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _out_dir(config: dict) -> str:
    out = config["run"]["out"]
    if not out:
        raise ConfigError("an output directory is required (--out DIR or run.out)")
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _base_report(command: str, config: dict, seeds: dict, dataset, splits, space) -> dict:
    return {
        "schema": REPORT_SCHEMA,
        "command": command,
        "method": config["run"]["method"] if command == "baseline" else "tabgns",
        "config": portable(config),
        "input_hash": input_hash(config, dataset),
        "seed": config["run"]["seed"],
        "seeds": seeds,
        "gate_init": config["search"]["gate_init"],
        "dataset": {
            "task": dataset.task,
            "n_features": dataset.n_features,
            "output_dim": dataset.output_dim,
            "rows": {k: int(len(getattr(splits, k))) for k in ("train", "valid", "test")},
        },
        "space": space.to_dict(),
        "params_supernet": {
            "paper": sn.count_parameters(space.widths, "paper"),
            "full": sn.count_parameters(space.widths, "full"),
        },
        "history_file": "history.csv",
        "checkpoint_file": "model.ckpt",
    }


def cmd_search(config: dict) -> int:
    out = _out_dir(config)
    keep = config["run"]["include_timings"]
    seeds, dataset, splits, space = prepare(config)
    cfg = search_config(config)
    with open(os.path.join(out, "config.resolved"), "w", encoding="utf-8") as fh:
        fh.write(serialize(config))
    tdata.write_metadata(tdata.dataset_metadata(dataset, splits), os.path.join(out, "dataset.meta"))

    result = search(splits, space, cfg)
    tuned = finetune(result.architecture, splits, cfg)
    timings = {"search_seconds": result.search_seconds, "finetune_seconds": tuned.seconds,
               "epoch_seconds": [h["wall_seconds"] for h in result.history]}
    extraction = _strip_timings(evaluate(result.architecture, splits.test, splits.stats), timings, "extraction", keep)
    test = _strip_timings(evaluate(tuned.architecture, splits.test, splits.stats), timings, "test", keep)

    report = _base_report("search", config, seeds, dataset, splits, space)
    report.update({
        "widths": tuned.architecture.widths,
        "kept": [k.tolist() for k in tuned.architecture.kept],
        "best_epoch": result.best_epoch,
        "epochs_run": len(result.history),
        "best_valid_loss": _clean_float(result.history[result.best_epoch]["valid_loss"]),
        "finetune": {"best_epoch": tuned.best_epoch, "epochs_run": len(tuned.history),
                     "best_valid_loss": _clean_float(tuned.best_valid_loss)},
        "clip_events": result.clip_events,
        "initial_expected_size": result.initial_expected_size,
        "initial_open_count": result.initial_open_count,
        "final_expected_size": result.history[result.best_epoch]["expected_size"],
        "metrics": {"test": test, "extraction_test": extraction},
        "timings": {k: (timings[k] if keep else None) for k in ("search_seconds", "finetune_seconds")},
        "supernet_checkpoint_file": "supernet.ckpt",
    })
    write_history(os.path.join(out, "history.csv"), result.history, keep)
    meta = {"command": "search", "seed": cfg.seed, "input_hash": report["input_hash"]}
    checkpoint.save(tuned.architecture, os.path.join(out, "model.ckpt"), meta)
    checkpoint.save(result.supernet, os.path.join(out, "supernet.ckpt"), meta)
    _write_json(os.path.join(out, "timings.json"), timings)
    _write_json(os.path.join(out, "report.json"), report)
    print(f"search done: widths {report['widths']}, test {test['loss_name']} {test['loss']:.6g} -> {out}")
    return 0


def cmd_baseline(config: dict) -> int:
    method = config["run"]["method"]
    if method == "tabgns":
        raise ConfigError("baseline needs run.method set to 'large-mlp' or 'random-search'")
    out = _out_dir(config)
    keep = config["run"]["include_timings"]
    seeds, dataset, splits, space = prepare(config)
    cfg = search_config(config)
    with open(os.path.join(out, "config.resolved"), "w", encoding="utf-8") as fh:
        fh.write(serialize(config))
    tdata.write_metadata(tdata.dataset_metadata(dataset, splits), os.path.join(out, "dataset.meta"))

    extra = {}
    if method == "large-mlp":
        res = train_fixed([space.max_width] * space.hidden_layers, splits, cfg, task=space.task)
        seconds = res.seconds
    else:
        rs = random_search_baseline(space, splits, cfg, config["run"]["trials"])
        res, seconds = rs.best, rs.seconds
        extra = {"sampled_widths": rs.widths,
                 "trials": [{**t, "valid_loss": _clean_float(t["valid_loss"])} for t in rs.trials]}
    timings = {"search_seconds": seconds, "epoch_seconds": [h["wall_seconds"] for h in res.history]}
    test = _strip_timings(evaluate(res.architecture, splits.test, splits.stats), timings, "test", keep)
    report = _base_report("baseline", config, seeds, dataset, splits, space)
    report.update({
        "widths": res.architecture.widths,
        "best_epoch": res.best_epoch,
        "epochs_run": len(res.history),
        "best_valid_loss": _clean_float(res.best_valid_loss),
        "metrics": {"test": test},
        "timings": {"search_seconds": seconds if keep else None, "finetune_seconds": None},
        **extra,
    })
    write_history(os.path.join(out, "history.csv"), res.history, keep)
    checkpoint.save(res.architecture, os.path.join(out, "model.ckpt"),
                    {"command": "baseline", "method": method, "seed": cfg.seed, "input_hash": report["input_hash"]})
    _write_json(os.path.join(out, "timings.json"), timings)
    _write_json(os.path.join(out, "report.json"), report)
    print(f"{method} done: widths {report['widths']}, test {test['loss_name']} {test['loss']:.6g} -> {out}")
    return 0


def cmd_evaluate(config: dict, paths: list) -> int:
    ckpt = paths[0] if paths else config["evaluate"]["checkpoint"]
    if len(paths) > 1:
        raise ConfigError("evaluate takes at most one checkpoint path")
    if not ckpt:
        raise ConfigError("no checkpoint given (positional PATH or --evaluate.checkpoint=FILE)")
    try:
        with open(ckpt, "rb") as fh:
            blob = fh.read()
    except FileNotFoundError as exc:
        raise ConfigError(f"checkpoint {ckpt} does not exist") from exc
    except OSError as exc:
        raise IntegrityError(f"cannot read checkpoint {ckpt}: {exc}") from exc
    model, meta = checkpoint.loads(blob)
    seeds, dataset, splits, space = prepare(config)
    part = config["evaluate"]["split"]
    metrics = evaluate(model, getattr(splits, part), splits.stats)
    keep = config["run"]["include_timings"]
    doc = {
        "schema": METRICS_SCHEMA,
        "checkpoint_sha256": hashlib.sha256(blob).hexdigest(),
        "checkpoint_kind": "supernet" if isinstance(model, sn.SuperNet) else "architecture",
        "checkpoint_meta": meta,
        "split": part,
        "input_hash": input_hash(config, dataset),
        "metrics": _strip_timings(metrics, {}, part, keep),
    }
    text = json.dumps(tdata._jsonable(doc), indent=2, sort_keys=True) + "\n"
    if config["run"]["out"]:
        out = _out_dir(config)
        with open(os.path.join(out, "metrics.json"), "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


# ------------------------------------------------------------------ report


def read_run(path: str, with_timings: bool = False) -> dict:
    rp = os.path.join(path, "report.json")
    try:
        with open(rp, encoding="utf-8") as fh:
            report = json.load(fh)
    except (OSError, ValueError) as exc:
        raise ReportSchemaError(f"{path}: no readable report.json ({exc})") from exc
    required = ("schema", "method", "seed", "gate_init", "widths", "metrics", "timings")
    if not isinstance(report, dict) or report.get("schema") != REPORT_SCHEMA:
        raise ReportSchemaError(f"{rp}: expected schema {REPORT_SCHEMA!r}, got {report.get('schema') if isinstance(report, dict) else None!r}")
    missing = [k for k in required if k not in report]
    if missing or "test" not in report["metrics"]:
        raise ReportSchemaError(f"{rp}: missing fields {missing or ['metrics.test']}")
    hist = []
    hp = os.path.join(path, report.get("history_file", "history.csv"))
    try:
        with open(hp, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                hist.append(row)
    except OSError as exc:
        raise ReportSchemaError(f"{path}: missing history file ({exc})") from exc
    seconds = report["timings"].get("search_seconds")
    if with_timings and seconds is None:
        try:
            with open(os.path.join(path, "timings.json"), encoding="utf-8") as fh:
                seconds = json.load(fh).get("search_seconds")
        except (OSError, ValueError):
            seconds = None
    return {"path": path, "report": report, "history": hist, "search_seconds": seconds}


def comparison_rows(runs: list) -> list:
    rows = []
    for run in runs:
        r = run["report"]
        test = r["metrics"]["test"]
        rows.append({
            "run": os.path.basename(os.path.normpath(run["path"])),
            "method": r["method"],
            "seed": r["seed"],
            "gate_init": r["gate_init"],
            "metric": test.get("loss_name", "loss"),
            "value": test["loss"],
            "accuracy": test.get("accuracy"),
            "widths": "-".join(str(w) for w in r["widths"]),
            "params_paper": test["params_paper"],
            "params_full": test["params_full"],
            "search_seconds": run["search_seconds"],
        })
    return rows


def size_series(name: str, run: dict) -> list:
    """Size after each completed epoch; epoch 0 is the untrained start."""
    r = run["report"]
    start = r.get("initial_expected_size")
    pts = []
    if start is not None:
        pts.append({"run": name, "epoch": 0, "expected_size": float(start),
                    "open_count": int(r.get("initial_open_count", 0))})
    for h in run["history"]:
        pts.append({"run": name, "epoch": int(h["epoch"]) + 1, "expected_size": float(h["expected_size"]),
                    "open_count": int(h["open_count"])})
    return pts


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def render_table(rows: list) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    cells = [cols] + [[_fmt(r[c]) for c in cols] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
    return "\n".join(lines) + "\n"


def sweep_summary(runs: list) -> list:
    """Median final size and metric per gate-init value over TabGNS runs."""
    groups = {}
    for run in runs:
        r = run["report"]
        if r["method"] != "tabgns":
            continue
        groups.setdefault(float(r["gate_init"]), []).append(r)
    out = []
    for g in sorted(groups):
        reps = groups[g]
        out.append({
            "gate_init": g,
            "runs": len(reps),
            "median_final_size": statistics.median(sum(r["widths"]) for r in reps),
            "median_params_paper": statistics.median(r["metrics"]["test"]["params_paper"] for r in reps),
            "median_metric": statistics.median(r["metrics"]["test"]["loss"] for r in reps),
        })
    return out


def _write_csv(path, rows: list, columns=None) -> None:
    columns = columns or (list(rows[0]) if rows else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow(["" if r[c] is None else (repr(r[c]) if isinstance(r[c], float) else r[c]) for c in columns])


def cmd_report(config: dict, paths: list) -> int:
    if not paths:
        raise ConfigError("report needs at least one run directory")
    runs = [read_run(p, config["report"]["timings"]) for p in paths]
    rows = comparison_rows(runs)
    table = render_table(rows)
    sys.stdout.write(table)
    if config["run"]["out"]:
        out = _out_dir(config)
        _write_csv(os.path.join(out, "comparison.csv"), rows)
        with open(os.path.join(out, "comparison.txt"), "w", encoding="utf-8") as fh:
            fh.write(table)
        series = []
        for run, row in zip(runs, rows):
            series.extend(size_series(row["run"], run))
        _write_csv(os.path.join(out, "size_series.csv"), series, ["run", "epoch", "expected_size", "open_count"])
        _write_csv(os.path.join(out, "gate_init_sweep.csv"), sweep_summary(runs),
                   ["gate_init", "runs", "median_final_size", "median_params_paper", "median_metric"])
    return 0


# -------------------------------------------------------------------- main


def _split_argv(argv: list):
    parser = argparse.ArgumentParser(prog="tabgns", description="Gated neuron selection for tabular MLPs.")
    parser.add_argument("command", choices=("search", "baseline", "evaluate", "report"))
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--seed", type=int, help="run seed (same as --run.seed)")
    parser.add_argument("--out", help="output directory (same as --run.out)")
    parser.add_argument("paths", nargs="*", help="checkpoint (evaluate) or run directories (report)")
    overrides, rest = {}, []
    for arg in argv:
        name, eq, value = arg.partition("=")
        if arg.startswith("--") and "." in name and name != "--" and eq:
            overrides[name[2:]] = _coerce(value)
        else:
            rest.append(arg)
    return parser, rest, overrides


def _limit_threads():
    raw = os.environ.get("TABGNS_THREADS")
    if raw is None or raw == "":
        return None
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"TABGNS_THREADS must be an integer, got {raw!r}") from exc
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(1, n))


def run(argv: list) -> int:
    parser, rest, overrides = _split_argv(argv)
    try:
        args = parser.parse_intermixed_args(rest)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    doc = None
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
    if args.seed is not None:
        overrides["run.seed"] = args.seed
    if args.out is not None:
        overrides["run.out"] = args.out
    config = resolve(doc, overrides)
    logging.basicConfig(level=getattr(logging, str(config["run"]["log_level"]).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    limiter = _limit_threads()
    try:
        if args.command == "search":
            if args.paths:
                raise ConfigError("search takes no positional arguments")
            return cmd_search(config)
        if args.command == "baseline":
            if args.paths:
                raise ConfigError("baseline takes no positional arguments")
            return cmd_baseline(config)
        if args.command == "evaluate":
            return cmd_evaluate(config, args.paths)
        return cmd_report(config, args.paths)
    finally:
        if limiter is not None:
            limiter.restore_original_limits()


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        return run(argv)
    except TabGNSError as exc:
        print(f"tabgns: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyboardInterrupt:
        print("tabgns: interrupted", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - last-resort diagnosis before the trace
        print(f"tabgns: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
