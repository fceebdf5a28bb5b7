"""Pure-numpy kernels: patch lowering and 2x pooling for 1/2/3 spatial dims.

Fallback used when the compiled extension is unavailable. Both backends
implement the same contracts and accumulation orders, so results agree to
the last bit on identical inputs.
"""

from __future__ import annotations

import itertools

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from drawnet.errors import IndivisibleExtent

NAME = "numpy"


def im2col(x: np.ndarray, k: int, s: int, p: int) -> np.ndarray:
    """Lower one (C, m1..mN) sample to a (C*k^N, prod(out)) patch matrix.

    Row index is (c, d1..dN) row-major, column index is the output
    position row-major; zero padding of width p is applied per axis.
    """
    n = x.ndim - 1
    if p:
        x = np.pad(x, [(0, 0)] + [(p, p)] * n)
    win = sliding_window_view(x, (k,) * n, axis=tuple(range(1, n + 1)))
    win = win[(slice(None),) + (slice(None, None, s),) * n]
    c = x.shape[0]
    perm = (0,) + tuple(range(1 + n, 1 + 2 * n)) + tuple(range(1, 1 + n))
    return np.ascontiguousarray(win.transpose(perm).reshape(c * k**n, -1))


def col2im(cols: np.ndarray, in_shape: tuple, k: int, s: int, p: int) -> np.ndarray:
    """Adjoint of im2col: scatter-add patches back onto the input grid."""
    c, spatial = in_shape[0], in_shape[1:]
    n = len(spatial)
    out_sp = tuple((m + 2 * p - k) // s + 1 for m in spatial)
    padded = np.zeros((c,) + tuple(m + 2 * p for m in spatial), dtype=cols.dtype)
    cols_r = cols.reshape((c,) + (k,) * n + out_sp)
    for offs in itertools.product(range(k), repeat=n):
        dst = (slice(None),) + tuple(
            slice(d, d + s * o, s) for d, o in zip(offs, out_sp)
        )
        padded[dst] += cols_r[(slice(None),) + offs]
    if p:
        padded = padded[(slice(None),) + tuple(slice(p, p + m) for m in spatial)]
    return np.ascontiguousarray(padded)


def _pool_transpose(n: int) -> tuple[int, ...]:
    return (0,) + tuple(1 + 2 * i for i in range(n)) + tuple(2 + 2 * i for i in range(n))


def maxpool2(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Window-2 stride-2 max over every spatial axis of one (C, m...) sample.

    Returns the pooled sample and the int64 argmax index within each
    window (row-major window order; ties take the first cell).
    """
    c, spatial = x.shape[0], x.shape[1:]
    n = len(spatial)
    if any(m % 2 for m in spatial):
        raise IndivisibleExtent(str(spatial))
    out_sp = tuple(m // 2 for m in spatial)
    shape = (c,) + tuple(v for o in out_sp for v in (o, 2))
    xt = x.reshape(shape).transpose(_pool_transpose(n))
    xt = np.ascontiguousarray(xt).reshape((c,) + out_sp + (2**n,))
    idx = xt.argmax(axis=-1).astype(np.int64)
    out = np.take_along_axis(xt, idx[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(out), idx


def maxpool2_backward(
    grad_out: np.ndarray, idx: np.ndarray, in_shape: tuple
) -> np.ndarray:
    """Route gradient to the argmax cell of each window."""
    c, spatial = in_shape[0], in_shape[1:]
    n = len(spatial)
    out_sp = tuple(m // 2 for m in spatial)
    zt = np.zeros((c,) + out_sp + (2**n,), dtype=grad_out.dtype)
    np.put_along_axis(zt, idx[..., None], grad_out[..., None], axis=-1)
    zr = zt.reshape((c,) + out_sp + (2,) * n)
    perm = _pool_transpose(n)
    inv = [0] * len(perm)
    for i, axis in enumerate(perm):
        inv[axis] = i
    return np.ascontiguousarray(zr.transpose(inv).reshape(in_shape))
