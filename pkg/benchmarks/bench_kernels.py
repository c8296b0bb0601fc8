"""Compare the compiled and numpy kernel backends.

Times each hot kernel on a few layer shapes, then a short end-to-end search
on the teacher-student fixture with each backend in a fresh subprocess (the
backend is fixed at import time).

    python3 benchmarks/bench_kernels.py [--epochs 20] [--repeat 5]
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

SHAPES = [(256, 10, 64), (256, 64, 64), (256, 512, 512)]  # (batch, in, out)

E2E = r"""
import json, sys, time
from tabgns import kernels
from tabgns.data import make_teacher_student, normalize, split
from tabgns.search import SearchConfig, search
from tabgns.supernet import SearchSpace
epochs, repeat = int(sys.argv[1]), int(sys.argv[2])
sp = normalize(split(make_teacher_student(10, [8, 8], 20000, 0.1, seed=0), seed=1))
best = float("inf")
for _ in range(repeat):
    t = time.perf_counter()
    res = search(sp, SearchSpace(10, 1, 3, 64), SearchConfig(max_epochs=epochs, patience=epochs))
    best = min(best, time.perf_counter() - t)
print(json.dumps({"backend": kernels.BACKEND, "seconds": best, "valid_loss": res.history[-1]["valid_loss"]}))
"""


def bench_kernels(repeat: int):
    from tabgns import _kernels_py as py

    try:
        from tabgns import _kernels_c as cc
    except ImportError:
        print("compiled extension not built; kernel table skipped")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':<16}{'shape':<16}{'numpy us':>10}{'compiled us':>13}{'ratio':>8}")
    for B, i, o in SHAPES:
        X = rng.standard_normal((B, i))
        W = rng.standard_normal((o, i))
        b = rng.standard_normal(o)
        mask = (rng.random(o) < 0.5).astype(float)
        z, a, _ = py.hidden_forward(X, W, b, mask)
        dh = rng.standard_normal((B, o))
        m = rng.random(W.shape)
        v = rng.random(W.shape)
        cases = {
            "hidden_forward": lambda k: k.hidden_forward(X, W, b, mask),
            "hidden_backward": lambda k: k.hidden_backward(dh, X, W, z, a, mask, True, True, True),
            "adam_update": lambda k: k.adam_update(W, dh.T @ X, m, v, 1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001),
        }
        for name, fn in cases.items():
            n = 50 if o < 512 else 10
            t_py = min(timeit.repeat(lambda: fn(py), number=n, repeat=repeat)) / n * 1e6
            t_cc = min(timeit.repeat(lambda: fn(cc), number=n, repeat=repeat)) / n * 1e6
            print(f"{name:<16}{f'{B}x{i}->{o}':<16}{t_py:>10.1f}{t_cc:>13.1f}{t_py / t_cc:>8.2f}")


def bench_search(epochs: int, repeat: int):
    print(f"\nsearch, teacher-student 20k rows, L=3 W=64, {epochs} epochs (best of {repeat})")
    out = {}
    for forced in ("python", "compiled"):
        env = dict(os.environ, TABGNS_KERNEL=forced)
        proc = subprocess.run([sys.executable, "-c", E2E, str(epochs), str(repeat)], env=env,
                              capture_output=True, text=True)
        if proc.returncode != 0:
            print(f"{forced}: failed\n{proc.stderr.strip()}")
            continue
        out[forced] = json.loads(proc.stdout)
        print(f"{forced:<10}{out[forced]['seconds']:8.2f} s   final valid loss {out[forced]['valid_loss']:.10f}")
    if len(out) == 2:
        print(f"speedup {out['python']['seconds'] / out['compiled']['seconds']:.2f}x")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-search", action="store_true")
    args = ap.parse_args()
    bench_kernels(args.repeat)
    if not args.skip_search:
        bench_search(args.epochs, min(args.repeat, 3))


if __name__ == "__main__":
    main()
