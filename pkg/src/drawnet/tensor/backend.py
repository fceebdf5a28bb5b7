"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback
is always available. Set DRAWNET_KERNELS=numpy (or =cython) to force a
choice, e.g. for benchmarking or debugging a miscompiled extension.
"""

from __future__ import annotations

import os
from contextlib import contextmanager
from types import ModuleType

from threadpoolctl import threadpool_limits

from drawnet.tensor import _kernels_np

# BLAS pools may split the GEMM reduction differently per thread count,
# which would make training bytes depend on the ambient OMP settings.
# Reductions are pinned to a fixed width inside deterministic scopes.
BLAS_THREADS = max(1, int(os.environ.get("DRAWNET_BLAS_THREADS", "1")))


@contextmanager
def deterministic_blas():
    """Pin the BLAS pool width so results do not depend on thread env."""
    with threadpool_limits(limits=BLAS_THREADS, user_api="blas"):
        yield


def _load(name: str) -> ModuleType:
    if name == "numpy":
        return _kernels_np
    if name == "cython":
        from drawnet.tensor import _kernels  # type: ignore[attr-defined]

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends() -> tuple[str, ...]:
    try:
        _load("cython")
    except ImportError:
        return ("numpy",)
    return ("cython", "numpy")


_forced = os.environ.get("DRAWNET_KERNELS", "auto").strip().lower()
if _forced in ("", "auto"):
    try:
        kernels = _load("cython")
    except ImportError:
        kernels = _kernels_np
else:
    kernels = _load(_forced)

BACKEND = kernels.NAME
