"""Feature normalization, velocity derivation and temporal resampling.

Every raw feature is min-max normalized per record so both tablet unit
systems land in [0, 1]. The timestamp never becomes a channel itself; it
is consumed by the velocity derivation and by resampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from drawnet.errors import DegenerateTime, MissingChannel, TooFewSamples
from drawnet.ingest import DrawingRecord

RAW_FEATURES = ("x", "y", "azimuth", "altitude", "pressure")


@dataclass
class NormalizedTrace:
    """Per-record [0,1] channels sampled on a shared (possibly non-uniform) grid."""

    channels: dict[str, np.ndarray]
    t_grid: np.ndarray
    label: str
    subject_id: str = ""
    task_id: str = ""
    source: str = "Synthetic"

    def __len__(self) -> int:
        return len(self.t_grid)

    def require(self, *names: str) -> None:
        for name in names:
            if name not in self.channels:
                raise MissingChannel(name)


def minmax(values: np.ndarray) -> np.ndarray:
    """Map onto [0,1]; a constant series maps to 0.5 (mid-range).

    Spans below a relative epsilon count as constant, otherwise rounding
    noise in a flat channel would be stretched to full scale.
    """
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    if hi - lo <= 1e-12 * max(abs(hi), abs(lo), 1.0):
        return np.full_like(values, 0.5)
    return (values - lo) / (hi - lo)


def minmax_normalize(record: DrawingRecord) -> NormalizedTrace:
    """Build the normalized trace for one record.

    Runs of equal timestamps are collapsed (first sample kept) so the
    grid is strictly increasing and velocity denominators stay non-zero.
    """
    t = record.column("t")
    keep = np.concatenate(([True], np.diff(t) > 0))
    if int(keep.sum()) < 2:
        raise TooFewSamples("fewer than 2 distinct timestamps")
    channels = {
        name: minmax(record.column(name)[keep]) for name in RAW_FEATURES
    }
    return NormalizedTrace(
        channels=channels,
        t_grid=t[keep],
        label=record.label,
        subject_id=record.subject_id,
        task_id=record.task_id,
        source=record.source,
    )


def derive_velocity(trace: NormalizedTrace) -> NormalizedTrace:
    """Add the speed channel computed from the normalized coordinates.

    Central differences on interior points, one-sided at the ends; the
    raw speeds are then min-max normalized like any other channel.
    """
    trace.require("x", "y")
    t = trace.t_grid
    if np.any(np.diff(t) <= 0):
        raise DegenerateTime("t_grid must be strictly increasing")
    x, y = trace.channels["x"], trace.channels["y"]
    n = len(t)
    speed = np.empty(n, dtype=np.float64)
    if n > 2:
        dt = t[2:] - t[:-2]
        if np.any(dt == 0):
            raise DegenerateTime("central-difference denominator is zero")
        speed[1:-1] = np.hypot(x[2:] - x[:-2], y[2:] - y[:-2]) / dt
    speed[0] = np.hypot(x[1] - x[0], y[1] - y[0]) / (t[1] - t[0])
    speed[-1] = np.hypot(x[-1] - x[-2], y[-1] - y[-2]) / (t[-1] - t[-2])
    channels = dict(trace.channels)
    channels["velocity"] = minmax(speed)
    return NormalizedTrace(
        channels=channels,
        t_grid=t,
        label=trace.label,
        subject_id=trace.subject_id,
        task_id=trace.task_id,
        source=trace.source,
    )


def resample_uniform(trace: NormalizedTrace, n: int = 128) -> NormalizedTrace:
    """Linearly interpolate every channel onto n uniformly spaced times."""
    if n < 2:
        raise ValueError("resample length must be at least 2")
    if len(trace) < 2:
        raise TooFewSamples("need at least 2 samples to resample")
    t = trace.t_grid
    target = np.linspace(t[0], t[-1], n)
    if np.array_equal(target, t):
        channels = {k: v.copy() for k, v in trace.channels.items()}
    else:
        channels = {k: np.interp(target, t, v) for k, v in trace.channels.items()}
    return NormalizedTrace(
        channels=channels,
        t_grid=target,
        label=trace.label,
        subject_id=trace.subject_id,
        task_id=trace.task_id,
        source=trace.source,
    )


def prepare_trace(
    record: DrawingRecord,
    *,
    with_velocity: bool,
    resample_to: int | None = None,
) -> NormalizedTrace:
    """normalize -> (velocity) -> (resample), the standard encoder input."""
    trace = minmax_normalize(record)
    if with_velocity:
        trace = derive_velocity(trace)
    if resample_to is not None:
        trace = resample_uniform(trace, resample_to)
    return trace
