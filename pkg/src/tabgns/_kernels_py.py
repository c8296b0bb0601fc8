"""Pure-numpy hot kernels. Reference semantics for the compiled twin in
``_kernels_c.pyx``; both expose the same five functions."""
import numpy as np


def linear(X, W, b):
    return X @ W.T + b


def hidden_forward(X, W, b, mask):
    """``z = X W^T + b``, ``a = relu(z)``, ``h = a * mask``; returns ``(z, a, h)``."""
    z = X @ W.T + b
    a = np.maximum(z, 0.0)
    h = a if mask is None else a * mask
    return z, a, h


def hidden_backward(d_h, X, W, z, a, mask, need_dx, need_wgrad, want_gate):
    """Reverse of :func:`hidden_forward`.

    Returns ``(dW, db, dX, gate)`` where ``gate`` is ``sum_rows(d_h * a)``
    (or the unreduced product when ``mask`` is per-row). Entries not asked
    for are ``None``.
    """
    gate = None
    if want_gate:
        prod = d_h * a
        gate = prod if (mask is not None and np.ndim(mask) == 2) else prod.sum(axis=0)
    d_z = d_h if mask is None else d_h * mask
    d_z = d_z * (z > 0.0)
    dW = d_z.T @ X if need_wgrad else None
    db = d_z.sum(axis=0) if need_wgrad else None
    dX = d_z @ W if need_dx else None
    return dW, db, dX, gate


def linear_backward(d_out, X, W, need_dx):
    dX = d_out @ W if need_dx else None
    return d_out.T @ X, d_out.sum(axis=0), dX


def adam_update(p, g, m, v, lr, beta1, beta2, eps, bc1, bc2):
    m = beta1 * m + (1.0 - beta1) * g
    v = beta2 * v + (1.0 - beta2) * (g * g)
    return p - lr * (m / bc1) / (np.sqrt(v / bc2) + eps), m, v
