# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: patch lowering and 2x pooling for 1/2/3 spatial dims.

Same contracts and accumulation orders as the numpy fallback; the win is
a single fused pass per kernel instead of a chain of array temporaries.
"""

import numpy as np

from drawnet.errors import IndivisibleExtent

NAME = "cython"

ctypedef fused real:
    float
    double


def _dtype_of(arr):
    return np.float32 if arr.itemsize == 4 else np.float64


# --- im2col ----------------------------------------------------------------

cdef inline Py_ssize_t _lo(Py_ssize_t d, int s, int p) noexcept nogil:
    # smallest o with o*s + d - p >= 0
    if p <= d:
        return 0
    return (p - d + s - 1) // s


cdef inline Py_ssize_t _hi(Py_ssize_t d, int s, int p, Py_ssize_t m,
                           Py_ssize_t o_count) noexcept nogil:
    # largest o with o*s + d - p <= m - 1, clipped to the output extent
    cdef Py_ssize_t h = (m - 1 - d + p) // s
    if h > o_count - 1:
        h = o_count - 1
    return h


def _im2col_1d(real[:, ::1] x, int k, int s, int p):
    cdef Py_ssize_t C = x.shape[0], M = x.shape[1]
    cdef Py_ssize_t O = (M + 2 * p - k) // s + 1
    out_np = np.zeros((C * k, O), dtype=np.float32 if real is float else np.float64)
    cdef real[:, ::1] cols = out_np
    cdef Py_ssize_t c, d, o, row, o_lo, o_hi
    with nogil:
        for c in range(C):
            for d in range(k):
                row = c * k + d
                o_lo = _lo(d, s, p)
                o_hi = _hi(d, s, p, M, O)
                for o in range(o_lo, o_hi + 1):
                    cols[row, o] = x[c, o * s + d - p]
    return out_np


def _im2col_2d(real[:, :, ::1] x, int k, int s, int p):
    cdef Py_ssize_t C = x.shape[0], M1 = x.shape[1], M2 = x.shape[2]
    cdef Py_ssize_t O1 = (M1 + 2 * p - k) // s + 1
    cdef Py_ssize_t O2 = (M2 + 2 * p - k) // s + 1
    out_np = np.zeros((C * k * k, O1 * O2),
                      dtype=np.float32 if real is float else np.float64)
    cdef real[:, ::1] cols = out_np
    cdef Py_ssize_t c, d1, d2, o1, o2, i1, row, base
    cdef Py_ssize_t lo1, hi1, lo2, hi2
    with nogil:
        for c in range(C):
            for d1 in range(k):
                lo1 = _lo(d1, s, p)
                hi1 = _hi(d1, s, p, M1, O1)
                for d2 in range(k):
                    row = (c * k + d1) * k + d2
                    lo2 = _lo(d2, s, p)
                    hi2 = _hi(d2, s, p, M2, O2)
                    for o1 in range(lo1, hi1 + 1):
                        i1 = o1 * s + d1 - p
                        base = o1 * O2
                        for o2 in range(lo2, hi2 + 1):
                            cols[row, base + o2] = x[c, i1, o2 * s + d2 - p]
    return out_np


def _im2col_3d(real[:, :, :, ::1] x, int k, int s, int p):
    cdef Py_ssize_t C = x.shape[0], M1 = x.shape[1], M2 = x.shape[2], M3 = x.shape[3]
    cdef Py_ssize_t O1 = (M1 + 2 * p - k) // s + 1
    cdef Py_ssize_t O2 = (M2 + 2 * p - k) // s + 1
    cdef Py_ssize_t O3 = (M3 + 2 * p - k) // s + 1
    out_np = np.zeros((C * k * k * k, O1 * O2 * O3),
                      dtype=np.float32 if real is float else np.float64)
    cdef real[:, ::1] cols = out_np
    cdef Py_ssize_t c, d1, d2, d3, o1, o2, o3, i1, i2, row, base
    cdef Py_ssize_t lo1, hi1, lo2, hi2, lo3, hi3
    with nogil:
        for c in range(C):
            for d1 in range(k):
                lo1 = _lo(d1, s, p)
                hi1 = _hi(d1, s, p, M1, O1)
                for d2 in range(k):
                    lo2 = _lo(d2, s, p)
                    hi2 = _hi(d2, s, p, M2, O2)
                    for d3 in range(k):
                        row = ((c * k + d1) * k + d2) * k + d3
                        lo3 = _lo(d3, s, p)
                        hi3 = _hi(d3, s, p, M3, O3)
                        for o1 in range(lo1, hi1 + 1):
                            i1 = o1 * s + d1 - p
                            for o2 in range(lo2, hi2 + 1):
                                i2 = o2 * s + d2 - p
                                base = (o1 * O2 + o2) * O3
                                for o3 in range(lo3, hi3 + 1):
                                    cols[row, base + o3] = x[c, i1, i2, o3 * s + d3 - p]
    return out_np


def im2col(x, int k, int s, int p):
    x = np.ascontiguousarray(x)
    if x.ndim == 2:
        return _im2col_1d(x, k, s, p)
    if x.ndim == 3:
        return _im2col_2d(x, k, s, p)
    if x.ndim == 4:
        return _im2col_3d(x, k, s, p)
    raise ValueError(f"im2col expects 1-3 spatial dims, got shape {x.shape}")


# --- col2im ----------------------------------------------------------------

def _col2im_1d(real[:, ::1] cols, Py_ssize_t C, Py_ssize_t M, int k, int s, int p):
    cdef Py_ssize_t O = (M + 2 * p - k) // s + 1
    pad_np = np.zeros((C, M + 2 * p), dtype=np.float32 if real is float else np.float64)
    cdef real[:, ::1] padded = pad_np
    cdef Py_ssize_t c, d, o, row
    with nogil:
        for c in range(C):
            for d in range(k):
                row = c * k + d
                for o in range(O):
                    padded[c, o * s + d] += cols[row, o]
    return pad_np[:, p:p + M].copy() if p else pad_np


def _col2im_2d(real[:, ::1] cols, Py_ssize_t C, Py_ssize_t M1, Py_ssize_t M2,
               int k, int s, int p):
    cdef Py_ssize_t O1 = (M1 + 2 * p - k) // s + 1
    cdef Py_ssize_t O2 = (M2 + 2 * p - k) // s + 1
    pad_np = np.zeros((C, M1 + 2 * p, M2 + 2 * p),
                      dtype=np.float32 if real is float else np.float64)
    cdef real[:, :, ::1] padded = pad_np
    cdef Py_ssize_t c, d1, d2, o1, o2, row, i1
    with nogil:
        for c in range(C):
            for d1 in range(k):
                for d2 in range(k):
                    row = (c * k + d1) * k + d2
                    for o1 in range(O1):
                        i1 = o1 * s + d1
                        for o2 in range(O2):
                            padded[c, i1, o2 * s + d2] += cols[row, o1 * O2 + o2]
    return pad_np[:, p:p + M1, p:p + M2].copy() if p else pad_np


def _col2im_3d(real[:, ::1] cols, Py_ssize_t C, Py_ssize_t M1, Py_ssize_t M2,
               Py_ssize_t M3, int k, int s, int p):
    cdef Py_ssize_t O1 = (M1 + 2 * p - k) // s + 1
    cdef Py_ssize_t O2 = (M2 + 2 * p - k) // s + 1
    cdef Py_ssize_t O3 = (M3 + 2 * p - k) // s + 1
    pad_np = np.zeros((C, M1 + 2 * p, M2 + 2 * p, M3 + 2 * p),
                      dtype=np.float32 if real is float else np.float64)
    cdef real[:, :, :, ::1] padded = pad_np
    cdef Py_ssize_t c, d1, d2, d3, o1, o2, o3, row, i1, i2, base
    with nogil:
        for c in range(C):
            for d1 in range(k):
                for d2 in range(k):
                    for d3 in range(k):
                        row = ((c * k + d1) * k + d2) * k + d3
                        for o1 in range(O1):
                            i1 = o1 * s + d1
                            for o2 in range(O2):
                                i2 = o2 * s + d2
                                base = (o1 * O2 + o2) * O3
                                for o3 in range(O3):
                                    padded[c, i1, i2, o3 * s + d3] += cols[row, base + o3]
    return pad_np[:, p:p + M1, p:p + M2, p:p + M3].copy() if p else pad_np


def col2im(cols, in_shape, int k, int s, int p):
    cols = np.ascontiguousarray(cols)
    n = len(in_shape) - 1
    if n == 1:
        return _col2im_1d(cols, in_shape[0], in_shape[1], k, s, p)
    if n == 2:
        return _col2im_2d(cols, in_shape[0], in_shape[1], in_shape[2], k, s, p)
    if n == 3:
        return _col2im_3d(cols, in_shape[0], in_shape[1], in_shape[2], in_shape[3],
                          k, s, p)
    raise ValueError(f"col2im expects 1-3 spatial dims, got shape {in_shape}")


# --- 2x max pooling ----------------------------------------------------------

def _maxpool2_1d(real[:, ::1] x):
    cdef Py_ssize_t C = x.shape[0], O = x.shape[1] // 2
    out_np = np.empty((C, O), dtype=np.float32 if real is float else np.float64)
    idx_np = np.empty((C, O), dtype=np.int64)
    cdef real[:, ::1] out = out_np
    cdef long long[:, ::1] idx = idx_np
    cdef Py_ssize_t c, o
    cdef real a, b
    with nogil:
        for c in range(C):
            for o in range(O):
                a = x[c, 2 * o]
                b = x[c, 2 * o + 1]
                if b > a:
                    out[c, o] = b
                    idx[c, o] = 1
                else:
                    out[c, o] = a
                    idx[c, o] = 0
    return out_np, idx_np


def _maxpool2_2d(real[:, :, ::1] x):
    cdef Py_ssize_t C = x.shape[0], O1 = x.shape[1] // 2, O2 = x.shape[2] // 2
    out_np = np.empty((C, O1, O2), dtype=np.float32 if real is float else np.float64)
    idx_np = np.empty((C, O1, O2), dtype=np.int64)
    cdef real[:, :, ::1] out = out_np
    cdef long long[:, :, ::1] idx = idx_np
    cdef Py_ssize_t c, o1, o2, d1, d2, best_i
    cdef real v, best
    with nogil:
        for c in range(C):
            for o1 in range(O1):
                for o2 in range(O2):
                    best = x[c, 2 * o1, 2 * o2]
                    best_i = 0
                    for d1 in range(2):
                        for d2 in range(2):
                            v = x[c, 2 * o1 + d1, 2 * o2 + d2]
                            if v > best:
                                best = v
                                best_i = 2 * d1 + d2
                    out[c, o1, o2] = best
                    idx[c, o1, o2] = best_i
    return out_np, idx_np


def _maxpool2_3d(real[:, :, :, ::1] x):
    cdef Py_ssize_t C = x.shape[0]
    cdef Py_ssize_t O1 = x.shape[1] // 2, O2 = x.shape[2] // 2, O3 = x.shape[3] // 2
    out_np = np.empty((C, O1, O2, O3), dtype=np.float32 if real is float else np.float64)
    idx_np = np.empty((C, O1, O2, O3), dtype=np.int64)
    cdef real[:, :, :, ::1] out = out_np
    cdef long long[:, :, :, ::1] idx = idx_np
    cdef Py_ssize_t c, o1, o2, o3, d1, d2, d3, best_i
    cdef real v, best
    with nogil:
        for c in range(C):
            for o1 in range(O1):
                for o2 in range(O2):
                    for o3 in range(O3):
                        best = x[c, 2 * o1, 2 * o2, 2 * o3]
                        best_i = 0
                        for d1 in range(2):
                            for d2 in range(2):
                                for d3 in range(2):
                                    v = x[c, 2 * o1 + d1, 2 * o2 + d2, 2 * o3 + d3]
                                    if v > best:
                                        best = v
                                        best_i = 4 * d1 + 2 * d2 + d3
                        out[c, o1, o2, o3] = best
                        idx[c, o1, o2, o3] = best_i
    return out_np, idx_np


def maxpool2(x):
    x = np.ascontiguousarray(x)
    if any(m % 2 for m in x.shape[1:]):
        raise IndivisibleExtent(str(x.shape[1:]))
    if x.ndim == 2:
        return _maxpool2_1d(x)
    if x.ndim == 3:
        return _maxpool2_2d(x)
    if x.ndim == 4:
        return _maxpool2_3d(x)
    raise ValueError(f"maxpool2 expects 1-3 spatial dims, got shape {x.shape}")


def _maxpool2_backward_1d(real[:, ::1] g, long long[:, ::1] idx, real[:, ::1] out):
    cdef Py_ssize_t C = g.shape[0], O = g.shape[1]
    cdef Py_ssize_t c, o
    with nogil:
        for c in range(C):
            for o in range(O):
                out[c, 2 * o + idx[c, o]] = g[c, o]


def _maxpool2_backward_2d(real[:, :, ::1] g, long long[:, :, ::1] idx,
                          real[:, :, ::1] out):
    cdef Py_ssize_t C = g.shape[0], O1 = g.shape[1], O2 = g.shape[2]
    cdef Py_ssize_t c, o1, o2, w
    with nogil:
        for c in range(C):
            for o1 in range(O1):
                for o2 in range(O2):
                    w = idx[c, o1, o2]
                    out[c, 2 * o1 + (w >> 1), 2 * o2 + (w & 1)] = g[c, o1, o2]


def _maxpool2_backward_3d(real[:, :, :, ::1] g, long long[:, :, :, ::1] idx,
                          real[:, :, :, ::1] out):
    cdef Py_ssize_t C = g.shape[0], O1 = g.shape[1], O2 = g.shape[2], O3 = g.shape[3]
    cdef Py_ssize_t c, o1, o2, o3, w
    with nogil:
        for c in range(C):
            for o1 in range(O1):
                for o2 in range(O2):
                    for o3 in range(O3):
                        w = idx[c, o1, o2, o3]
                        out[c, 2 * o1 + (w >> 2), 2 * o2 + ((w >> 1) & 1),
                            2 * o3 + (w & 1)] = g[c, o1, o2, o3]


def maxpool2_backward(grad_out, idx, in_shape):
    grad_out = np.ascontiguousarray(grad_out)
    out = np.zeros(in_shape, dtype=grad_out.dtype)
    if grad_out.ndim == 2:
        _maxpool2_backward_1d(grad_out, idx, out)
    elif grad_out.ndim == 3:
        _maxpool2_backward_2d(grad_out, idx, out)
    elif grad_out.ndim == 4:
        _maxpool2_backward_3d(grad_out, idx, out)
    else:
        raise ValueError(f"maxpool2_backward: bad rank {grad_out.ndim}")
    return out
