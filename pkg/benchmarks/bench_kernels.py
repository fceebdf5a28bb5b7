#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times the patch lowering (im2col), its adjoint scatter (col2im) and the
2x max pooling at the shapes the network actually hits, plus a full
conv-layer forward+backward through whichever backend is selected.

    python benchmarks/bench_kernels.py           # representative shapes
    python benchmarks/bench_kernels.py --full    # adds the 128^3 layer
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from drawnet.tensor import ops
from drawnet.tensor.backend import _load, available_backends
from drawnet.tensor.tensor import ConvSpec

KERNEL_SHAPES = [
    ("1d conv1 in", (6, 128), 5, 2, 2),
    ("2d conv1 in", (3, 128, 128), 5, 2, 2),
    ("2d conv2 in", (48, 32, 32), 5, 2, 2),
    ("3d conv1 in, R=32", (3, 32, 32, 32), 5, 2, 2),
    ("3d conv2 in, R=32", (48, 8, 8, 8), 5, 2, 2),
]
FULL_SHAPES = [
    ("3d conv1 in, R=128", (3, 128, 128, 128), 5, 2, 2),
]
POOL_SHAPES = [
    ("2d pool", (48, 64, 64)),
    ("3d pool, R=32", (48, 16, 16, 16)),
]
LAYER_SPECS = [
    ("conv2d 3->48 @128^2", ConvSpec(2, 3, 48, 5, 2, 2), (3, 128, 128)),
    ("conv3d 3->48 @32^3", ConvSpec(3, 3, 48, 5, 2, 2), (3, 32, 32, 32)),
]


def timeit(fn, *, repeat: int = 5, warmup: int = 1) -> float:
    for _ in range(warmup):
        fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(backends, shapes) -> None:
    rng = np.random.default_rng(0)
    print(f"{'case':28s} " + " ".join(f"{name + ' (ms)':>14s}" for name in backends))
    for label, shape, k, s, p in shapes:
        x = rng.standard_normal(shape).astype(np.float32)
        cols = _load(backends[0]).im2col(x, k, s, p)
        grad = rng.standard_normal(cols.shape).astype(np.float32)
        row_i = [timeit(lambda b=b: _load(b).im2col(x, k, s, p)) for b in backends]
        row_c = [timeit(lambda b=b: _load(b).col2im(grad, shape, k, s, p)) for b in backends]
        print(f"im2col {label:21s} " + " ".join(f"{1e3 * t:14.2f}" for t in row_i))
        print(f"col2im {label:21s} " + " ".join(f"{1e3 * t:14.2f}" for t in row_c))
    for label, shape in POOL_SHAPES:
        x = rng.standard_normal(shape).astype(np.float32)
        out, idx = _load(backends[0]).maxpool2(x)
        g = rng.standard_normal(out.shape).astype(np.float32)
        row_f = [timeit(lambda b=b: _load(b).maxpool2(x)) for b in backends]
        row_b = [
            timeit(lambda b=b: _load(b).maxpool2_backward(g, idx, shape)) for b in backends
        ]
        print(f"pool   {label:21s} " + " ".join(f"{1e3 * t:14.2f}" for t in row_f))
        print(f"pool'  {label:21s} " + " ".join(f"{1e3 * t:14.2f}" for t in row_b))


def bench_layers(backends) -> None:
    import drawnet.tensor.backend as backend_mod

    rng = np.random.default_rng(1)
    print(f"\n{'conv layer fwd+bwd':28s} " + " ".join(f"{n + ' (ms)':>14s}" for n in backends))
    for label, spec, shape in LAYER_SPECS:
        x = rng.standard_normal((4,) + shape).astype(np.float32)
        w = rng.standard_normal(spec.weight_shape).astype(np.float32)
        b = rng.standard_normal(spec.out_channels).astype(np.float32)
        gout = rng.standard_normal(
            (4, spec.out_channels) + spec.out_spatial(shape[1:])
        ).astype(np.float32)

        def run():
            ops.conv_forward(x, w, b, spec)
            ops.conv_backward(gout, x, w, spec)

        row = []
        saved = backend_mod.kernels
        try:
            for name in backends:
                backend_mod.kernels = _load(name)
                row.append(timeit(run, repeat=3))
        finally:
            backend_mod.kernels = saved
        print(f"{label:28s} " + " ".join(f"{1e3 * t:14.1f}" for t in row))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--full", action="store_true", help="include the 128^3 shapes")
    args = parser.parse_args()
    backends = list(available_backends())
    print(f"backends: {', '.join(backends)}")
    shapes = KERNEL_SHAPES + (FULL_SHAPES if args.full else [])
    bench_kernels(backends, shapes)
    bench_layers(backends)


if __name__ == "__main__":
    main()
