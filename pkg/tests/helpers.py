"""Shared builders for the test suite."""
import numpy as np

from tabgns import supernet as sn
from tabgns.data import make_teacher_student, normalize, split
from tabgns.gates import sample_gumbel
from tabgns.grad_core import DenseLayer


def random_gated_net(rng, L=2, W=4, batch=8, task="regression", d=None, k=None):
    """A SuperNet with random weights, biases and mixed-sign logits, plus a batch."""
    d = d or int(rng.integers(1, 6))
    k = k or (1 if task == "regression" else 3)
    space = sn.SearchSpace(d, k, L, W, task)
    net = sn.init_supernet(space, int(rng.integers(2**31)), 0.0)
    net.layers = [DenseLayer(l.weight, rng.normal(scale=0.3, size=l.bias.shape)) for l in net.layers]
    net.logits = rng.normal(scale=2.0, size=net.logits.shape)
    X = rng.normal(size=(batch, d))
    Y = rng.normal(size=(batch, k)) if task == "regression" else rng.integers(0, k, size=batch)
    return net, X, Y


def frozen_noise(rng, net):
    shape = net.logits.shape
    return sample_gumbel(rng, shape), sample_gumbel(rng, shape)


def teacher_splits(n_rows=2000, seed=0, split_seed=1, input_dim=10, widths=(8, 8), noise_std=0.1):
    ds = make_teacher_student(input_dim, list(widths), n_rows, noise_std, seed=seed)
    return normalize(split(ds, seed=split_seed))


# criterion id -> (status, detail); filled by test_acceptance, printed by conftest
ACCEPTANCE = {}


def record(cid, ok, detail, status=None):
    ACCEPTANCE[cid] = (status or ("PASS" if ok else "FAIL"), detail)
