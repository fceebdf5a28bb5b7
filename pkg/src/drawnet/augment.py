"""Label-preserving training-set expansion.

Four transform families: flips and exact lattice rotations operate on the
encoded grids, illumination shifts the stroke colors, and jitter perturbs
the raw coordinates before re-encoding. Geometric and color transforms do
not apply to the 1D series; plans requesting them for a 1D target are
rejected. Augment the training partition only.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from drawnet.encode import EncodeConfig, Image2D, VoxelGrid3D, encode_for_dim
from drawnet.errors import (
    InvalidAngle,
    InvalidAxis,
    NonSquareGrid,
    PlanInvalidForDimension,
)
from drawnet.ingest import DrawingRecord, FeatureSet
from drawnet.preprocess import prepare_trace

FAMILIES = ("flip", "rotation", "illumination", "jitter")
FLIP_AXES_2D = ("horizontal", "vertical")
FLIP_AXES_3D = ("x", "y")


@dataclass(frozen=True)
class AugmentPlan:
    families: frozenset[str] = frozenset({"flip", "rotation", "illumination", "jitter"})
    rotation_angles: tuple[int, ...] = (90, 180, 270)
    illumination_delta: float = 0.1
    jitter_sigma: float = 0.01
    seed: int = 0
    multiplicity: int = 4  # clones per record for the stochastic families

    def __post_init__(self) -> None:
        unknown = self.families - set(FAMILIES)
        if unknown:
            raise PlanInvalidForDimension(f"unknown families {sorted(unknown)}")
        for angle in self.rotation_angles:
            if angle not in (90, 180, 270):
                raise InvalidAngle(str(angle))
        if self.jitter_sigma < 0 or self.illumination_delta < 0:
            raise ValueError("magnitudes must be non-negative")
        if self.multiplicity < 1:
            raise ValueError("multiplicity must be at least 1")

    def validate_for_dim(self, dim: int) -> None:
        if dim == 1 and self.families - {"jitter"}:
            raise PlanInvalidForDimension(
                f"families {sorted(self.families - {'jitter'})} not applicable to 1D"
            )


def _grid_and_axes(x, axis: str):
    if isinstance(x, Image2D):
        table = {"horizontal": 2, "vertical": 1}  # pixels are [c, iy, ix]
    elif isinstance(x, VoxelGrid3D):
        table = {"x": 3, "y": 2}  # voxels are [c, iz, iy, ix]
    else:
        raise TypeError(f"cannot flip {type(x).__name__}")
    if axis not in table:
        raise InvalidAxis(f"{axis!r} for {type(x).__name__}")
    return table[axis]


def flip(x, axis: str):
    """Mirror an image or voxel grid about the named axis."""
    arr_axis = _grid_and_axes(x, axis)
    if isinstance(x, Image2D):
        return Image2D(np.flip(x.pixels, axis=arr_axis).copy())
    return VoxelGrid3D(np.flip(x.voxels, axis=arr_axis).copy())


def rotate(x, angle_deg: int):
    """Exact lattice rotation: image about its center, grid about the z axis."""
    if angle_deg not in (90, 180, 270):
        raise InvalidAngle(str(angle_deg))
    k = angle_deg // 90
    if isinstance(x, Image2D):
        arr, axes = x.pixels, (1, 2)
    elif isinstance(x, VoxelGrid3D):
        arr, axes = x.voxels, (2, 3)  # the (iy, ix) plane
    else:
        raise TypeError(f"cannot rotate {type(x).__name__}")
    if arr.shape[axes[0]] != arr.shape[axes[1]]:
        raise NonSquareGrid(str(arr.shape))
    out = np.rot90(arr, k=k, axes=axes).copy()
    return Image2D(out) if isinstance(x, Image2D) else VoxelGrid3D(out)


def illuminate(x, deltas=None, *, delta_range: float = 0.1, seed: int | None = None):
    """Shift stroke colors channel-wise, clamped to [0,1]; background stays 0."""
    if deltas is None:
        rng = np.random.default_rng(seed)
        deltas = rng.uniform(-delta_range, delta_range, size=3)
    deltas = np.asarray(deltas, dtype=np.float32)
    arr = x.pixels if isinstance(x, Image2D) else x.voxels
    out = arr.copy()
    stroke = np.any(arr > 0, axis=0)
    for c in range(3):
        out[c][stroke] = np.clip(out[c][stroke] + deltas[c], 0.0, 1.0)
    return Image2D(out) if isinstance(x, Image2D) else VoxelGrid3D(out)


def jitter_record(
    record: DrawingRecord, sigma: float = 0.01, seed: int | None = None
) -> DrawingRecord:
    """Add uniform coordinate noise scaled by each axis' span.

    Operates on the raw signal; timestamps, label and every other field
    are untouched. Deterministic for a fixed seed.
    """
    if sigma == 0:
        return record
    rng = np.random.default_rng(seed)
    x = record.column("x")
    y = record.column("y")
    span_x = float(x.max() - x.min())
    span_y = float(y.max() - y.min())
    eps = rng.uniform(-sigma * span_x, sigma * span_x, size=len(x))
    eta = rng.uniform(-sigma * span_y, sigma * span_y, size=len(y))
    samples = tuple(
        replace(s, x=s.x + float(e), y=s.y + float(h))
        for s, e, h in zip(record.samples, eps, eta)
    )
    return replace(record, samples=samples)


@dataclass
class EncodedExample:
    """One training-ready array with its label and provenance."""

    values: np.ndarray
    label: str
    subject_id: str
    task_id: str
    provenance: str  # "orig", "flip-horizontal", "jitter-2", ...


def _wrap(dim: int, values: np.ndarray):
    return Image2D(values) if dim == 2 else VoxelGrid3D(values)


def expand_dataset(
    records: Sequence[DrawingRecord],
    plan: AugmentPlan,
    target_dim: int,
    fs: FeatureSet,
    cfg: EncodeConfig,
) -> list[EncodedExample]:
    """Encode every record and append its transformed clones.

    Clone seeds are derived from (plan.seed, record index, clone index),
    so the output is identical no matter how records are scheduled.
    """
    plan.validate_for_dim(target_dim)
    if target_dim == 3 and not fs.velocity:
        raise PlanInvalidForDimension("velocity is mandatory for 3D targets")

    out: list[EncodedExample] = []
    resample_to = cfg.length if target_dim == 1 else None
    for rec_idx, record in enumerate(records):
        trace = prepare_trace(record, with_velocity=fs.velocity, resample_to=resample_to)
        base = encode_for_dim(trace, target_dim, fs, cfg)

        def emit(values: np.ndarray, provenance: str) -> None:
            out.append(
                EncodedExample(
                    values=values,
                    label=record.label,
                    subject_id=record.subject_id,
                    task_id=record.task_id,
                    provenance=provenance,
                )
            )

        emit(base, "orig")
        if target_dim in (2, 3):
            wrapped = _wrap(target_dim, base)
            if "flip" in plan.families:
                axes = FLIP_AXES_2D if target_dim == 2 else FLIP_AXES_3D
                for axis in axes:
                    arr = flip(wrapped, axis)
                    emit(arr.pixels if target_dim == 2 else arr.voxels, f"flip-{axis}")
            if "rotation" in plan.families:
                for angle in plan.rotation_angles:
                    arr = rotate(wrapped, angle)
                    emit(arr.pixels if target_dim == 2 else arr.voxels, f"rot-{angle}")
            if "illumination" in plan.families:
                for clone in range(plan.multiplicity):
                    seed = np.random.SeedSequence(
                        [plan.seed, rec_idx, clone, 0]
                    ).generate_state(1)[0]
                    arr = illuminate(
                        wrapped, delta_range=plan.illumination_delta, seed=int(seed)
                    )
                    emit(arr.pixels if target_dim == 2 else arr.voxels, f"illum-{clone}")
        if "jitter" in plan.families:
            for clone in range(plan.multiplicity):
                seed = np.random.SeedSequence(
                    [plan.seed, rec_idx, clone, 1]
                ).generate_state(1)[0]
                jittered = jitter_record(record, plan.jitter_sigma, seed=int(seed))
                jtrace = prepare_trace(
                    jittered, with_velocity=fs.velocity, resample_to=resample_to
                )
                emit(encode_for_dim(jtrace, target_dim, fs, cfg), f"jitter-{clone}")
    return out
