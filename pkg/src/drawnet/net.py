"""The simplified-AlexNet classifier in 1, 2 or 3 convolution dimensions.

The layer schedule is fixed; only the spatial rank, the input channel
count and the input extent vary. Channel/kernel/stride numbers:

    Conv(48, k5, s2, p2)+ReLU -> Pool -> Conv(128, k5, s2, p2)+ReLU ->
    Pool -> Conv(192, k3, s1, p1)+ReLU -> Conv(192, k3, s1, p1)+ReLU ->
    Pool -> Flatten -> FC(192)+ReLU -> Dropout(0.5) -> FC(128)+ReLU ->
    Dropout(0.5) -> FC(2)+Softmax

Two output classes: index 0 = HC, index 1 = PD.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from drawnet import gdt
from drawnet.errors import ShapeMismatch, ShapeUnderflow, UnsupportedRank
from drawnet.tensor import ops
from drawnet.tensor.tensor import ConvSpec, Tensor

N_CLASSES = 2
_CONVS = (  # (out_channels, kernel, stride, padding)
    (48, 5, 2, 2),
    (128, 5, 2, 2),
    (192, 3, 1, 1),
    (192, 3, 1, 1),
)
_FC_WIDTHS = (192, 128)
_DROPOUT_RATE = 0.5


@dataclass(frozen=True)
class NetworkConfig:
    spatial_rank: int
    in_channels: int
    input_extent: int = 128

    def __post_init__(self) -> None:
        if self.spatial_rank not in (1, 2, 3):
            raise UnsupportedRank(str(self.spatial_rank))
        if self.in_channels < 1:
            raise ShapeMismatch("in_channels must be positive")
        if self.input_extent < 1:
            raise ShapeMismatch("input_extent must be positive")

    @property
    def input_shape(self) -> tuple[int, ...]:
        return (self.in_channels,) + (self.input_extent,) * self.spatial_rank


@dataclass(frozen=True)
class TraceRow:
    name: str
    input_shape: tuple[int, ...]
    output_shape: tuple[int, ...]
    param_count: int


@dataclass(frozen=True)
class LayerTrace:
    rows: tuple[TraceRow, ...]

    @property
    def total_params(self) -> int:
        return sum(r.param_count for r in self.rows)

    def input_shapes(self) -> tuple[tuple[int, ...], ...]:
        return tuple(r.input_shape for r in self.rows)


def _he_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class ConvRelu:
    name = "Conv+ReLU"

    def __init__(self, spec: ConvSpec, rng: np.random.Generator, dtype):
        self.spec = spec
        fan_in = spec.in_channels * spec.kernel_size**spec.spatial_rank
        self.w = Tensor(_he_uniform(rng, spec.weight_shape, fan_in, dtype))
        self.b = Tensor(np.zeros(spec.out_channels, dtype=dtype))
        self._x = self._pre = None

    def forward(self, x, mode, rng=None):
        self._x = x
        self._pre = ops.conv_forward(x, self.w.data, self.b.data, self.spec)
        return ops.relu(self._pre)

    def backward(self, grad):
        grad = ops.relu_backward(grad, self._pre)
        dx, dw, db = ops.conv_backward(grad, self._x, self.w.data, self.spec)
        self.w.ensure_grad()[...] += dw
        self.b.ensure_grad()[...] += db
        return dx

    def params(self):
        return [("w", self.w), ("b", self.b)]


class MaxPool:
    name = "MaxPooling"

    def __init__(self, spatial_rank: int):
        self.spatial_rank = spatial_rank
        self._idx = self._in_shape = None

    def forward(self, x, mode, rng=None):
        self._in_shape = x.shape
        out, self._idx = ops.maxpool(x, self.spatial_rank)
        return out

    def backward(self, grad):
        return ops.maxpool_backward(grad, self._idx, self._in_shape, self.spatial_rank)

    def params(self):
        return []


class Flatten:
    name = "Flatten"

    def __init__(self, spatial_rank: int):
        self.spatial_rank = spatial_rank
        self._in_shape = None

    def forward(self, x, mode, rng=None):
        self._in_shape = x.shape
        if x.ndim == self.spatial_rank + 2:
            return np.ascontiguousarray(x).reshape(x.shape[0], -1)
        return np.ascontiguousarray(x).reshape(-1)

    def backward(self, grad):
        return grad.reshape(self._in_shape)

    def params(self):
        return []


class FullyConnected:
    def __init__(self, in_features: int, out_features: int, rng, dtype, *, relu: bool):
        self.relu = relu
        self.name = "FC+ReLU" if relu else "FC+Softmax"
        self.w = Tensor(_he_uniform(rng, (out_features, in_features), in_features, dtype))
        self.b = Tensor(np.zeros(out_features, dtype=dtype))
        self._x = self._pre = None

    def forward(self, x, mode, rng=None):
        self._x = x
        self._pre = ops.linear(x, self.w.data, self.b.data)
        return ops.relu(self._pre) if self.relu else self._pre

    def backward(self, grad):
        if self.relu:
            grad = ops.relu_backward(grad, self._pre)
        dx, dw, db = ops.linear_backward(grad, self._x, self.w.data)
        self.w.ensure_grad()[...] += dw
        self.b.ensure_grad()[...] += db
        return dx

    def params(self):
        return [("w", self.w), ("b", self.b)]


class Dropout:
    name = "Dropout"

    def __init__(self, rate: float):
        self.rate = rate
        self._mask = None

    def forward(self, x, mode, rng=None):
        out, self._mask = ops.dropout(x, self.rate, mode, rng)
        return out

    def backward(self, grad):
        return ops.dropout_backward(grad, self._mask, self.rate)

    def params(self):
        return []


class Network:
    """Built layers plus their config; forward saves caches for backward."""

    def __init__(self, cfg: NetworkConfig, layers: list):
        self.cfg = cfg
        self.layers = layers

    def forward(self, x: np.ndarray, mode: str = "eval",
                rng: np.random.Generator | None = None) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, mode, rng)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for _, p in layer.params()]

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return [
            (f"layer{i:02d}.{name}", p)
            for i, layer in enumerate(self.layers)
            for name, p in layer.params()
        ]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()


def shape_trace(cfg: NetworkConfig) -> LayerTrace:
    """Symbolic shape propagation through the fixed schedule."""
    rows: list[TraceRow] = []
    channels = cfg.in_channels
    spatial = (cfg.input_extent,) * cfg.spatial_rank

    def conv_rows(out_ch: int, k: int, s: int, p: int) -> None:
        nonlocal channels, spatial
        spec = ConvSpec(cfg.spatial_rank, channels, out_ch, k, s, p)
        try:
            out_sp = spec.out_spatial(spatial)
        except ShapeMismatch as exc:
            raise ShapeUnderflow(str(exc)) from exc
        n_params = out_ch * channels * k**cfg.spatial_rank + out_ch
        rows.append(TraceRow("Conv+ReLU", (channels,) + spatial, (out_ch,) + out_sp, n_params))
        channels, spatial = out_ch, out_sp

    def pool_row() -> None:
        nonlocal spatial
        if any(m < 2 or m % 2 for m in spatial):
            raise ShapeUnderflow(f"cannot 2x-pool extents {spatial}")
        out_sp = tuple(m // 2 for m in spatial)
        rows.append(TraceRow("MaxPooling", (channels,) + spatial, (channels,) + out_sp, 0))
        spatial = out_sp

    conv_rows(*_CONVS[0])
    pool_row()
    conv_rows(*_CONVS[1])
    pool_row()
    conv_rows(*_CONVS[2])
    conv_rows(*_CONVS[3])
    pool_row()

    width = channels * int(np.prod(spatial))
    rows.append(TraceRow("Flatten", (channels,) + spatial, (width,), 0))
    for out_w in _FC_WIDTHS:
        rows.append(TraceRow("FC+ReLU", (width,), (out_w,), out_w * width + out_w))
        rows.append(TraceRow("Dropout", (out_w,), (out_w,), 0))
        width = out_w
    rows.append(
        TraceRow("FC+Softmax", (width,), (N_CLASSES,), N_CLASSES * width + N_CLASSES)
    )
    return LayerTrace(tuple(rows))


def build_network(cfg: NetworkConfig, seed: int = 0, dtype=np.float32) -> Network:
    """He-uniform initialized network; deterministic for a given (cfg, seed)."""
    trace = shape_trace(cfg)  # validates the geometry up front
    rng = np.random.default_rng(seed)
    layers: list = []
    channels = cfg.in_channels
    for i, (out_ch, k, s, p) in enumerate(_CONVS):
        layers.append(
            ConvRelu(ConvSpec(cfg.spatial_rank, channels, out_ch, k, s, p), rng, dtype)
        )
        if i != 2:  # pools follow conv1, conv2 and conv4
            layers.append(MaxPool(cfg.spatial_rank))
        channels = out_ch
    layers.append(Flatten(cfg.spatial_rank))
    flatten_row = next(r for r in trace.rows if r.name == "Flatten")
    width = flatten_row.output_shape[0]
    for out_w in _FC_WIDTHS:
        layers.append(FullyConnected(width, out_w, rng, dtype, relu=True))
        layers.append(Dropout(_DROPOUT_RATE))
        width = out_w
    layers.append(FullyConnected(width, N_CLASSES, rng, dtype, relu=False))
    return Network(cfg, layers)


def param_count(network: Network) -> int:
    return sum(p.size for p in network.parameters())


def forward(network: Network, batch: np.ndarray, mode: str = "eval",
            rng: np.random.Generator | None = None) -> np.ndarray:
    return network.forward(batch, mode, rng)


def predict(network: Network, batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eval-mode class indices and probabilities; ties resolve to HC (0)."""
    logits = network.forward(batch, "eval")
    probs = ops.softmax(logits)
    labels = np.argmax(probs, axis=-1)
    return labels, probs


def save_checkpoint(network: Network, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for name, p in network.named_parameters():
        gdt.write(directory / f"{name}.gdt", p.data)
        names.append(name)
    header = {
        "spatial_rank": network.cfg.spatial_rank,
        "in_channels": network.cfg.in_channels,
        "input_extent": network.cfg.input_extent,
        "params": names,
    }
    (directory / "network.json").write_text(json.dumps(header, indent=2) + "\n")


def load_checkpoint(directory: str | Path) -> Network:
    directory = Path(directory)
    header = json.loads((directory / "network.json").read_text())
    cfg = NetworkConfig(
        spatial_rank=header["spatial_rank"],
        in_channels=header["in_channels"],
        input_extent=header["input_extent"],
    )
    network = build_network(cfg, seed=0)
    for name, p in network.named_parameters():
        data = gdt.read(directory / f"{name}.gdt")
        if data.shape != p.shape:
            raise ShapeMismatch(f"checkpoint {name}: {data.shape} != {p.shape}")
        p.data = data
    return network
