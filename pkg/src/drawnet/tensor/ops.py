"""Layer operations, their exact gradients, Adam and gradient checking.

Convolution is cross-correlation lowered to patch-matrix GEMM; pooling is
window-2/stride-2. Ops accept a single sample (C, m...) or a batch
(B, C, m...); the spatial rank comes from the ConvSpec or, for pooling,
from an explicit argument. Nothing here mutates its inputs except the
optimizer, which owns the parameter update.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from drawnet.errors import NonFiniteLogit, ShapeMismatch
from drawnet.tensor import backend
from drawnet.tensor.tensor import ConvSpec, Tensor


def _as_batch(x: np.ndarray, spatial_rank: int) -> tuple[np.ndarray, bool]:
    if x.ndim == spatial_rank + 1:
        return x[None], False
    if x.ndim == spatial_rank + 2:
        return x, True
    raise ShapeMismatch(
        f"expected rank {spatial_rank + 1} or {spatial_rank + 2}, got shape {x.shape}"
    )


def conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """Zero-padded strided cross-correlation."""
    if w.shape != spec.weight_shape:
        raise ShapeMismatch(f"weights {w.shape}, expected {spec.weight_shape}")
    if b.shape != (spec.out_channels,):
        raise ShapeMismatch(f"bias {b.shape}, expected ({spec.out_channels},)")
    xb, batched = _as_batch(np.ascontiguousarray(x), spec.spatial_rank)
    if xb.shape[1] != spec.in_channels:
        raise ShapeMismatch(f"input channels {xb.shape[1]} != {spec.in_channels}")
    out_sp = spec.out_spatial(xb.shape[2:])
    w_mat = w.reshape(spec.out_channels, -1)
    out = np.empty((xb.shape[0], spec.out_channels) + out_sp, dtype=xb.dtype)
    for i in range(xb.shape[0]):
        cols = backend.kernels.im2col(xb[i], spec.kernel_size, spec.stride, spec.padding)
        out[i] = (w_mat @ cols + b[:, None]).reshape((spec.out_channels,) + out_sp)
    return out if batched else out[0]


def conv_backward(
    grad_out: np.ndarray, x: np.ndarray, w: np.ndarray, spec: ConvSpec
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of conv_forward w.r.t. input, weights and bias."""
    xb, batched = _as_batch(np.ascontiguousarray(x), spec.spatial_rank)
    gb, gbatched = _as_batch(np.ascontiguousarray(grad_out), spec.spatial_rank)
    if batched != gbatched or gb.shape[0] != xb.shape[0]:
        raise ShapeMismatch("grad_out batching does not match input")
    out_sp = spec.out_spatial(xb.shape[2:])
    if gb.shape[1:] != (spec.out_channels,) + out_sp:
        raise ShapeMismatch(f"grad_out {gb.shape[1:]}, expected {(spec.out_channels,) + out_sp}")
    w_mat = w.reshape(spec.out_channels, -1)
    grad_w = np.zeros_like(w_mat)
    grad_b = np.zeros(spec.out_channels, dtype=w.dtype)
    grad_x = np.empty_like(xb)
    for i in range(xb.shape[0]):
        # patches are recomputed instead of cached: at volumetric sizes the
        # col matrix is far larger than the input itself
        cols = backend.kernels.im2col(xb[i], spec.kernel_size, spec.stride, spec.padding)
        g_mat = gb[i].reshape(spec.out_channels, -1)
        grad_w += g_mat @ cols.T
        grad_b += g_mat.sum(axis=1)
        grad_cols = w_mat.T @ g_mat
        grad_x[i] = backend.kernels.col2im(
            grad_cols, xb[i].shape, spec.kernel_size, spec.stride, spec.padding
        )
    return (grad_x if batched else grad_x[0]), grad_w.reshape(w.shape), grad_b


def maxpool(
    x: np.ndarray, spatial_rank: int, window: int = 2, stride: int = 2
) -> tuple[np.ndarray, np.ndarray]:
    """Max pooling; only the 2/2 geometry is defined. Returns (out, argmax)."""
    if window != 2 or stride != 2:
        raise ShapeMismatch("only window=2, stride=2 pooling is supported")
    xb, batched = _as_batch(np.ascontiguousarray(x), spatial_rank)
    outs, idxs = zip(*(backend.kernels.maxpool2(xb[i]) for i in range(xb.shape[0])))
    out, idx = np.stack(outs), np.stack(idxs)
    return (out, idx) if batched else (out[0], idx[0])


def maxpool_backward(
    grad_out: np.ndarray, idx: np.ndarray, in_shape: tuple, spatial_rank: int
) -> np.ndarray:
    gb, batched = _as_batch(np.ascontiguousarray(grad_out), spatial_rank)
    sample_shape = in_shape[1:] if batched else in_shape
    grads = [
        backend.kernels.maxpool2_backward(gb[i], idx[i] if batched else idx, sample_shape)
        for i in range(gb.shape[0])
    ]
    out = np.stack(grads)
    return out if batched else out[0]


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    return grad_out * (x > 0)


def linear(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Affine map with weights (F_out, F_in) and bias (F_out,)."""
    if x.shape[-1] != w.shape[1] or b.shape != (w.shape[0],):
        raise ShapeMismatch(f"linear: x {x.shape}, w {w.shape}, b {b.shape}")
    return x @ w.T + b


def linear_backward(
    grad_out: np.ndarray, x: np.ndarray, w: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if grad_out.ndim == 1:
        return grad_out @ w, np.outer(grad_out, x), grad_out.copy()
    return grad_out @ w, grad_out.T @ x, grad_out.sum(axis=0)


def dropout(
    x: np.ndarray,
    rate: float = 0.5,
    mode: str = "train",
    rng: np.random.Generator | int | None = None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Inverted dropout: eval mode is the identity. Returns (out, mask)."""
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be train or eval, got {mode!r}")
    if mode == "eval" or rate == 0:
        return x, None
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    mask = (rng.random(x.shape) >= rate).astype(x.dtype)
    return x * mask / (1 - rate), mask


def dropout_backward(grad_out: np.ndarray, mask: np.ndarray | None, rate: float) -> np.ndarray:
    if mask is None:
        return grad_out
    return grad_out * mask / (1 - rate)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(
    logits: np.ndarray, labels: np.ndarray | int
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. logits."""
    if not np.all(np.isfinite(logits)):
        raise NonFiniteLogit(str(logits))
    single = logits.ndim == 1
    lb = logits[None] if single else logits
    yb = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if lb.ndim != 2 or yb.shape != (lb.shape[0],):
        raise ShapeMismatch(f"logits {logits.shape} vs labels {np.shape(labels)}")
    if np.any((yb < 0) | (yb >= lb.shape[1])):
        raise ShapeMismatch(f"labels out of range for {lb.shape[1]} classes")
    p = softmax(lb)
    n = lb.shape[0]
    picked = p[np.arange(n), yb]
    loss = float(-np.log(np.maximum(picked, np.finfo(lb.dtype).tiny)).mean())
    grad = p.copy()
    grad[np.arange(n), yb] -= 1
    grad /= n
    grad = grad.astype(lb.dtype)
    return loss, (grad[0] if single else grad)


class Adam:
    """Bias-corrected Adam over a list of parameter Tensors."""

    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 1e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        bc1 = 1 - self.beta1**self.t
        bc2 = 1 - self.beta2**self.t
        for i, p in enumerate(self.params):
            g = p.ensure_grad()
            if g.shape != p.data.shape:
                raise ShapeMismatch(f"param {p.shape} vs grad {g.shape}")
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            p.data -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.dtype)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


@dataclass
class GradCheckReport:
    max_rel_error: float
    max_abs_error: float
    checked: int

    def __str__(self) -> str:
        return (
            f"grad check: {self.checked} elements, "
            f"max rel {self.max_rel_error:.3e}, max abs {self.max_abs_error:.3e}"
        )


def grad_check(
    fn: Callable[[np.ndarray], tuple[float, np.ndarray]],
    point: np.ndarray,
    h: float = 1e-5,
) -> GradCheckReport:
    """Compare fn's analytic gradient against central differences.

    fn maps an array to (scalar, gradient). Perturbations are applied in
    float64; fn decides its own compute precision. The 1e-4 floor in the
    relative-error denominator only guards dead directions against 0/0
    noise.
    """
    x = np.array(point, dtype=np.float64)
    _, analytic = fn(x)
    numeric = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        ix = it.multi_index
        xp = x.copy()
        xp[ix] += h
        xm = x.copy()
        xm[ix] -= h
        numeric[ix] = (fn(xp)[0] - fn(xm)[0]) / (2 * h)
        it.iternext()
    abs_err = np.abs(analytic - numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-4)
    return GradCheckReport(
        max_rel_error=float((abs_err / denom).max()),
        max_abs_error=float(abs_err.max()),
        checked=int(x.size),
    )
