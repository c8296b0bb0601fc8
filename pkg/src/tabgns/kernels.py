"""Hot-kernel backend selection.

The compiled extension is used when it imports; otherwise, or when
``TABGNS_KERNEL=python`` is set, the numpy implementation is used. Per-row
gate masks always take the numpy path.
"""
import os

from . import _kernels_py

_forced = os.environ.get("TABGNS_KERNEL", "").strip().lower()

_compiled = None
if _forced not in ("python", "py", "numpy"):
    try:
        from . import _kernels_c as _compiled
    except ImportError:
        if _forced in ("c", "compiled", "cython"):
            raise

BACKEND = "compiled" if _compiled is not None else "python"
_impl = _compiled or _kernels_py

linear = _impl.linear
linear_backward = _impl.linear_backward
adam_update = _impl.adam_update


def hidden_forward(X, W, b, mask):
    if mask is not None and getattr(mask, "ndim", 0) != 1:
        return _kernels_py.hidden_forward(X, W, b, mask)
    return _impl.hidden_forward(X, W, b, mask)


def hidden_backward(d_h, X, W, z, a, mask, need_dx=True, need_wgrad=True, want_gate=False):
    if mask is not None and getattr(mask, "ndim", 0) != 1:
        return _kernels_py.hidden_backward(d_h, X, W, z, a, mask, need_dx, need_wgrad, want_gate)
    return _impl.hidden_backward(d_h, X, W, z, a, mask, need_dx, need_wgrad, want_gate)
