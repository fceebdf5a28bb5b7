"""Dense tensor value type and convolution geometry."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from drawnet.errors import ShapeMismatch


class Tensor:
    """A contiguous float array with an optional same-shape gradient slot.

    float32 is the training dtype; float64 is used for gradient checking.
    """

    __slots__ = ("data", "grad")

    def __init__(self, data: np.ndarray, grad: np.ndarray | None = None):
        self.data = np.ascontiguousarray(data)
        if self.data.dtype not in (np.float32, np.float64):
            raise ShapeMismatch(f"unsupported dtype {self.data.dtype}")
        if grad is not None and grad.shape != self.data.shape:
            raise ShapeMismatch(f"grad shape {grad.shape} != data shape {self.data.shape}")
        self.grad = grad

    @classmethod
    def zeros(cls, shape, dtype=np.float32) -> "Tensor":
        return cls(np.zeros(shape, dtype=dtype))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def ensure_grad(self) -> np.ndarray:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        return self.grad

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name})"


@dataclass(frozen=True)
class ConvSpec:
    """Geometry of one N-dimensional convolution layer (cubic kernel)."""

    spatial_rank: int
    in_channels: int
    out_channels: int
    kernel_size: int
    stride: int = 1
    padding: int = 0

    def __post_init__(self) -> None:
        if self.spatial_rank not in (1, 2, 3):
            raise ShapeMismatch(f"spatial_rank must be 1..3, got {self.spatial_rank}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ShapeMismatch(f"kernel size must be odd, got {self.kernel_size}")
        if self.stride < 1 or self.padding < 0:
            raise ShapeMismatch("stride must be >= 1 and padding >= 0")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ShapeMismatch("channel counts must be positive")

    def out_extent(self, m: int) -> int:
        return (m + 2 * self.padding - self.kernel_size) // self.stride + 1

    def out_spatial(self, in_spatial: tuple[int, ...]) -> tuple[int, ...]:
        if len(in_spatial) != self.spatial_rank:
            raise ShapeMismatch(
                f"expected {self.spatial_rank} spatial dims, got {in_spatial}"
            )
        out = tuple(self.out_extent(m) for m in in_spatial)
        if any(e < 1 for e in out):
            raise ShapeMismatch(f"empty output extents {out} from input {in_spatial}")
        return out

    @property
    def weight_shape(self) -> tuple[int, ...]:
        return (self.out_channels, self.in_channels) + (self.kernel_size,) * self.spatial_rank
