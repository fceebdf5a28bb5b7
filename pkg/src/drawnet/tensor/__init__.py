"""N-dimensional tensor engine: kernels, layer ops, gradients, Adam."""

from drawnet.tensor.backend import BACKEND, available_backends
from drawnet.tensor.tensor import ConvSpec, Tensor

__all__ = ["BACKEND", "available_backends", "ConvSpec", "Tensor"]
