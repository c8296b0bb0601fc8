# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: BLAS dgemm for the products, fused C loops for
bias, ReLU, gate masking and the Adam update.

Arrays are row-major; dgemm is column-major, so every call below is written
against the transposed view of each buffer. Only 1-D masks are handled
here; the dispatcher routes per-row masks to the numpy kernels.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

cdef extern from "_select.h" nogil:
    double pos_select(double d, double z)


cdef inline void _gemm_xwt(double[:, ::1] X, double[:, ::1] W, double[:, ::1] out) noexcept nogil:
    # out (B, o) = X (B, i) @ W^T      col-major: out^T = W * X^T
    cdef int B = X.shape[0], i = X.shape[1], o = W.shape[0]
    cdef double one = 1.0, zero = 0.0
    cdef char ta = b"T", tb = b"N"
    if B == 0 or o == 0:
        return
    if i == 0:
        out[:, :] = 0.0
        return
    dgemm(&ta, &tb, &o, &B, &i, &one, &W[0, 0], &i, &X[0, 0], &i, &zero, &out[0, 0], &o)


cdef inline void _gemm_dw(double[:, ::1] D, double[:, ::1] X, double[:, ::1] out) noexcept nogil:
    # out (o, i) = D^T (o, B) @ X (B, i)   col-major: out^T = X^T * D
    cdef int B = X.shape[0], i = X.shape[1], o = D.shape[1]
    cdef double one = 1.0, zero = 0.0
    cdef char ta = b"N", tb = b"T"
    if i == 0 or o == 0:
        return
    if B == 0:
        out[:, :] = 0.0
        return
    dgemm(&ta, &tb, &i, &o, &B, &one, &X[0, 0], &i, &D[0, 0], &o, &zero, &out[0, 0], &i)


cdef inline void _gemm_dx(double[:, ::1] D, double[:, ::1] W, double[:, ::1] out) noexcept nogil:
    # out (B, i) = D (B, o) @ W (o, i)     col-major: out^T = W^T * D^T
    cdef int B = D.shape[0], o = D.shape[1], i = W.shape[1]
    cdef double one = 1.0, zero = 0.0
    cdef char ta = b"N"
    if B == 0 or i == 0:
        return
    if o == 0:
        out[:, :] = 0.0
        return
    dgemm(&ta, &ta, &i, &B, &o, &one, &W[0, 0], &i, &D[0, 0], &o, &zero, &out[0, 0], &i)


def linear(X, W, b):
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[:, ::1] Wv = np.ascontiguousarray(W, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    z = np.empty((Xv.shape[0], Wv.shape[0]))
    cdef double[:, ::1] zv = z
    cdef Py_ssize_t r, j
    with nogil:
        _gemm_xwt(Xv, Wv, zv)
        for r in range(zv.shape[0]):
            for j in range(zv.shape[1]):
                zv[r, j] += bv[j]
    return z


def hidden_forward(X, W, b, mask):
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[:, ::1] Wv = np.ascontiguousarray(W, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], w = Wv.shape[0], r, j
    cdef bint has_mask = mask is not None
    cdef double[::1] mv
    if has_mask:
        mv = np.ascontiguousarray(mask, dtype=np.float64)
    z = np.empty((n, w))
    a = np.empty((n, w))
    h = np.empty((n, w)) if has_mask else a
    cdef double[:, ::1] zv = z, av = a, hv = h
    cdef double t
    with nogil:
        _gemm_xwt(Xv, Wv, zv)
        for r in range(n):
            for j in range(w):
                t = zv[r, j] + bv[j]
                zv[r, j] = t
                t = pos_select(t, t)
                av[r, j] = t
                if has_mask:
                    hv[r, j] = t * mv[j]
    return z, a, h


def hidden_backward(d_h, X, W, z, a, mask, bint need_dx, bint need_wgrad, bint want_gate):
    cdef double[:, ::1] dhv = np.ascontiguousarray(d_h, dtype=np.float64)
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[:, ::1] Wv = np.ascontiguousarray(W, dtype=np.float64)
    cdef double[:, ::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef Py_ssize_t n = dhv.shape[0], w = dhv.shape[1], r, j
    cdef bint has_mask = mask is not None
    cdef double[::1] mv
    if has_mask:
        mv = np.ascontiguousarray(mask, dtype=np.float64)
    d_z = np.empty((n, w))
    gate = np.zeros(w) if want_gate else None
    db = np.zeros(w) if need_wgrad else None
    cdef double[:, ::1] dzv = d_z
    cdef double[::1] gv, dbv
    if want_gate:
        gv = gate
    if need_wgrad:
        dbv = db
    cdef const double* dh = &dhv[0, 0] if n * w else NULL
    cdef const double* zp = &zv[0, 0] if n * w else NULL
    cdef const double* ap = &av[0, 0] if n * w else NULL
    cdef double* dz = &dzv[0, 0] if n * w else NULL
    cdef Py_ssize_t off
    with nogil:
        if want_gate:
            for r in range(n):
                off = r * w
                for j in range(w):
                    gv[j] += dh[off + j] * ap[off + j]
        for r in range(n):
            off = r * w
            if has_mask:
                for j in range(w):
                    dz[off + j] = pos_select(dh[off + j] * mv[j], zp[off + j])
            else:
                for j in range(w):
                    dz[off + j] = pos_select(dh[off + j], zp[off + j])
        if need_wgrad:
            for r in range(n):
                off = r * w
                for j in range(w):
                    dbv[j] += dz[off + j]
    dW = None
    dX = None
    cdef double[:, ::1] out
    if need_wgrad:
        dW = np.empty((w, Xv.shape[1]))
        out = dW
        with nogil:
            _gemm_dw(dzv, Xv, out)
    if need_dx:
        dX = np.empty((n, Wv.shape[1]))
        out = dX
        with nogil:
            _gemm_dx(dzv, Wv, out)
    return dW, db, dX, gate


def linear_backward(d_out, X, W, bint need_dx):
    cdef double[:, ::1] dv = np.ascontiguousarray(d_out, dtype=np.float64)
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[:, ::1] Wv = np.ascontiguousarray(W, dtype=np.float64)
    cdef Py_ssize_t n = dv.shape[0], o = dv.shape[1], r, j
    dW = np.empty((o, Xv.shape[1]))
    db = np.zeros(o)
    cdef double[:, ::1] dWv = dW
    cdef double[::1] dbv = db
    cdef double[:, ::1] out
    with nogil:
        _gemm_dw(dv, Xv, dWv)
        for r in range(n):
            for j in range(o):
                dbv[j] += dv[r, j]
    dX = None
    if need_dx:
        dX = np.empty((n, Wv.shape[1]))
        out = dX
        with nogil:
            _gemm_dx(dv, Wv, out)
    return dW, db, dX


def adam_update(p, g, m, v, double lr, double beta1, double beta2, double eps, double bc1, double bc2):
    pa = np.ascontiguousarray(p, dtype=np.float64)
    shape = pa.shape
    cdef double[::1] pv = pa.reshape(-1)
    cdef double[::1] gv = np.ascontiguousarray(g, dtype=np.float64).reshape(-1)
    cdef double[::1] mv = np.ascontiguousarray(m, dtype=np.float64).reshape(-1)
    cdef double[::1] vv = np.ascontiguousarray(v, dtype=np.float64).reshape(-1)
    cdef Py_ssize_t n = pv.shape[0], i
    p_new = np.empty(n)
    m_new = np.empty(n)
    v_new = np.empty(n)
    cdef double[::1] po = p_new, mo = m_new, vo = v_new
    cdef double gi, mi, vi
    with nogil:
        for i in range(n):
            gi = gv[i]
            mi = beta1 * mv[i] + (1.0 - beta1) * gi
            vi = beta2 * vv[i] + (1.0 - beta2) * (gi * gi)
            mo[i] = mi
            vo[i] = vi
            po[i] = pv[i] - lr * (mi / bc1) / (sqrt(vi / bc2) + eps)
    return p_new.reshape(shape), m_new.reshape(shape), v_new.reshape(shape)
