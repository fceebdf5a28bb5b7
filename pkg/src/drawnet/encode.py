"""The three enhanced representations of a normalized trace.

1D: enabled channels stacked as a (C, L) series. 2D: the trajectory
rasterized into a (3, H, W) RGB image where azimuth/altitude/pressure
color the stroke and velocity sets its width. 3D: an (x, y, velocity)
polyline voxelized into a (3, R, R, R) grid with the same coloring.

Stroke geometry is a supercover traversal: every cell the ideal segment
passes through is visited, with exact corner crossings stepping
diagonally (no anti-diagonal side cells). Later segments overwrite
earlier ones; disabled color channels render at full intensity so the
network input keeps 3 channels.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from drawnet.errors import MissingChannel, ShapeMismatch
from drawnet.ingest import FeatureSet
from drawnet.preprocess import NormalizedTrace

COLOR_FEATURES = ("azimuth", "altitude", "pressure")  # -> (R, G, B)


@dataclass(frozen=True)
class EncodeConfig:
    """Grid geometry shared by the encoders."""

    length: int = 128          # 1D series length L
    height: int = 128          # 2D rows (y)
    width: int = 128           # 2D columns (x)
    resolution: int = 128      # 3D cube edge R
    line_width_min: int = 1
    line_width_max: int = 7
    margin: int = 1            # blank cells kept around the stroke
    overwrite: str = "last"    # only last-writer-wins is defined

    def __post_init__(self) -> None:
        for name in ("length", "height", "width", "resolution"):
            if getattr(self, name) < 8:
                raise ValueError(f"{name} must be at least 8")
        if self.line_width_min < 1:
            raise ValueError("line_width_min must be at least 1")
        if self.line_width_max < self.line_width_min:
            raise ValueError("line_width_max must be >= line_width_min")
        if self.margin < 0:
            raise ValueError("margin must be non-negative")
        if self.overwrite != "last":
            raise ValueError("unsupported overwrite policy")


@dataclass
class Series1D:
    values: np.ndarray            # (C, L) float32 in [0, 1]
    channel_names: tuple[str, ...]


@dataclass
class Image2D:
    pixels: np.ndarray            # (3, H, W) float32, [c, iy, ix], y axis up


@dataclass
class VoxelGrid3D:
    voxels: np.ndarray            # (3, R, R, R) float32, [c, iz, iy, ix]

    def to_sparse(self) -> tuple[np.ndarray, np.ndarray]:
        """Non-zero cells as (N, 3) int (ix, iy, iz) plus (N, 3) rgb."""
        iz, iy, ix = np.nonzero(np.any(self.voxels > 0, axis=0))
        indices = np.stack([ix, iy, iz], axis=1)
        colors = self.voxels[:, iz, iy, ix].T.copy()
        return indices, colors

    @classmethod
    def from_sparse(
        cls, indices: np.ndarray, colors: np.ndarray, resolution: int
    ) -> "VoxelGrid3D":
        voxels = np.zeros((3, resolution, resolution, resolution), dtype=np.float32)
        ix, iy, iz = indices[:, 0], indices[:, 1], indices[:, 2]
        voxels[:, iz, iy, ix] = np.asarray(colors, dtype=np.float32).T
        return cls(voxels)


def grid_index(values: np.ndarray, extent: int, margin: int) -> np.ndarray:
    """Affine map of [0,1] values onto cell indices [margin, extent-1-margin]."""
    scale = extent - 1 - 2 * margin
    if scale < 1:
        raise ValueError("margin leaves no drawable cells")
    return np.rint(np.asarray(values) * scale).astype(np.int64) + margin


def supercover_line(p0, p1) -> list[tuple[int, ...]]:
    """Integer-exact cell traversal from p0 to p1 (any dimension).

    Boundary-crossing parameters are compared as exact rationals, so a
    crossing shared by several axes steps them simultaneously.
    """
    p0 = tuple(int(v) for v in p0)
    p1 = tuple(int(v) for v in p1)
    delta = [b - a for a, b in zip(p0, p1)]
    step = [(d > 0) - (d < 0) for d in delta]
    absd = [abs(d) for d in delta]
    cell = list(p0)
    cells = [tuple(cell)]
    while tuple(cell) != p1:
        best_axes: list[int] = []
        best_num = best_den = 0
        for axis in range(len(cell)):
            if cell[axis] == p1[axis]:
                continue
            # next crossing of axis at t = num/(2*|d|)
            num = 2 * step[axis] * (cell[axis] - p0[axis]) + 1
            den = absd[axis]
            if not best_axes:
                best_axes, best_num, best_den = [axis], num, den
                continue
            cmp = num * best_den - best_num * den
            if cmp < 0:
                best_axes, best_num, best_den = [axis], num, den
            elif cmp == 0:
                best_axes.append(axis)
        for axis in best_axes:
            cell[axis] += step[axis]
        cells.append(tuple(cell))
    return cells


@lru_cache(maxsize=16)
def disc_offsets(diameter: int) -> np.ndarray:
    """Cell offsets of a filled disc: centers within diameter/2 of the origin."""
    r = diameter // 2
    radius_sq = (diameter / 2.0) ** 2
    offs = [
        (dy, dx)
        for dy in range(-r, r + 1)
        for dx in range(-r, r + 1)
        if dy * dy + dx * dx <= radius_sq
    ]
    return np.array(offs, dtype=np.int64)


def _segment_color(trace: NormalizedTrace, fs: FeatureSet, i: int, j: int) -> np.ndarray:
    color = np.ones(3, dtype=np.float32)
    for c, name in enumerate(COLOR_FEATURES):
        if getattr(fs, name):
            ch = trace.channels[name]
            color[c] = 0.5 * (ch[i] + ch[j])
    return color


def _check_channels(trace: NormalizedTrace, fs: FeatureSet) -> None:
    for name in fs.enabled():
        if name not in trace.channels:
            raise MissingChannel(name)


def encode_1d(trace: NormalizedTrace, fs: FeatureSet, cfg: EncodeConfig) -> Series1D:
    """Stack the enabled channels, canonical order, as a (C, L) series."""
    _check_channels(trace, fs)
    if len(trace) != cfg.length:
        raise ShapeMismatch(
            f"trace length {len(trace)} != configured series length {cfg.length}; "
            "resample first"
        )
    names = fs.enabled()
    values = np.stack([trace.channels[n] for n in names]).astype(np.float32)
    return Series1D(values=values, channel_names=names)


def encode_2d(trace: NormalizedTrace, fs: FeatureSet, cfg: EncodeConfig) -> Image2D:
    """Rasterize the trajectory into a (3, H, W) image.

    Each consecutive-sample segment is stamped as discs along its
    supercover cells; the disc diameter follows the segment's mean
    velocity when that feature is enabled, else the minimum width.
    """
    _check_channels(trace, fs)
    px = grid_index(trace.channels["x"], cfg.width, cfg.margin)
    py = grid_index(trace.channels["y"], cfg.height, cfg.margin)
    velocity = trace.channels.get("velocity") if fs.velocity else None

    pixels = np.zeros((3, cfg.height, cfg.width), dtype=np.float32)
    n = len(trace)
    span = cfg.line_width_max - cfg.line_width_min
    for i in range(max(n - 1, 1)):
        j = min(i + 1, n - 1)
        color = _segment_color(trace, fs, i, j)
        if velocity is None:
            w = cfg.line_width_min
        else:
            v_seg = 0.5 * (velocity[i] + velocity[j])
            w = int(round(cfg.line_width_min + v_seg * span))
        cells = np.array(supercover_line((px[i], py[i]), (px[j], py[j])), dtype=np.int64)
        offs = disc_offsets(w)
        ys = (cells[:, 1][:, None] + offs[None, :, 0]).ravel()
        xs = (cells[:, 0][:, None] + offs[None, :, 1]).ravel()
        keep = (ys >= 0) & (ys < cfg.height) & (xs >= 0) & (xs < cfg.width)
        pixels[:, ys[keep], xs[keep]] = color[:, None]
    return Image2D(pixels=pixels)


def encode_3d(trace: NormalizedTrace, fs: FeatureSet, cfg: EncodeConfig) -> VoxelGrid3D:
    """Voxelize the (x, y, velocity) polyline into a (3, R, R, R) grid."""
    if not fs.velocity:
        raise MissingChannel("velocity is mandatory for the 3D encoding")
    _check_channels(trace, fs)
    r = cfg.resolution
    ix = grid_index(trace.channels["x"], r, cfg.margin)
    iy = grid_index(trace.channels["y"], r, cfg.margin)
    iz = grid_index(trace.channels["velocity"], r, cfg.margin)

    voxels = np.zeros((3, r, r, r), dtype=np.float32)
    n = len(trace)
    for i in range(max(n - 1, 1)):
        j = min(i + 1, n - 1)
        color = _segment_color(trace, fs, i, j)
        cells = supercover_line((ix[i], iy[i], iz[i]), (ix[j], iy[j], iz[j]))
        arr = np.array(cells, dtype=np.int64)
        voxels[:, arr[:, 2], arr[:, 1], arr[:, 0]] = color[:, None]
    return VoxelGrid3D(voxels=voxels)


def encode_for_dim(
    trace: NormalizedTrace, dim: int, fs: FeatureSet, cfg: EncodeConfig
) -> np.ndarray:
    """Encoded array for a target dimensionality (training-ready)."""
    if dim == 1:
        return encode_1d(trace, fs, cfg).values
    if dim == 2:
        return encode_2d(trace, fs, cfg).pixels
    if dim == 3:
        return encode_3d(trace, fs, cfg).voxels
    raise ValueError(f"dimension must be 1, 2 or 3, got {dim}")
