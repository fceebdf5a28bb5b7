"""Synthetic Archimedean-spiral cohorts with controllable tremor.

The clinical recordings are private, so end-to-end behavior is exercised
on generated spirals instead. Tremor is modeled as a radial sinusoid in
the 4-6 Hz band plus band-limited noise, and an unsteady pen speed; both
effects are deliberately exaggerated between the two classes so the
cohorts are separable by construction. This is modeling license for
testing, not a physiological claim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from drawnet.ingest import (
    DatasetManifest,
    DrawingRecord,
    ManifestEntry,
    StylusSample,
    serialize_record,
    validate_record,
    write_manifest,
)

SAMPLING_HZ = 150.0  # matches the PaHaW acquisition rate
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SpiralParams:
    turns: float = 4.0
    radius_growth: float = 1.0        # b in r = b * theta, mm per radian
    n_samples: int = 600
    tremor_amplitude: float = 0.01    # fraction of the 2*pi*b gap between turns
    tremor_freq_hz: float = 5.0
    velocity_jerk: float = 0.05       # depth of the pen-speed modulation
    pressure_wobble: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if self.turns < 1:
            raise ValueError("turns must be at least 1")
        if self.tremor_amplitude < 0:
            raise ValueError("tremor amplitude must be non-negative")
        if self.n_samples < 16:
            raise ValueError("need at least 16 samples")


# class-conditional parameter ranges used by gen_cohort
PD_LIKE = {"tremor_amplitude": (0.10, 0.20), "velocity_jerk": (0.35, 0.60),
           "pressure_wobble": (0.10, 0.20)}
HC_LIKE = {"tremor_amplitude": (0.005, 0.02), "velocity_jerk": (0.02, 0.08),
           "pressure_wobble": (0.01, 0.05)}


def gen_spiral(params: SpiralParams, label: str) -> DrawingRecord:
    """One spiral drawing, sampled at 150 Hz, passing every ingest check."""
    rng = np.random.default_rng(params.seed)
    n = params.n_samples
    t = np.arange(n) / SAMPLING_HZ

    # pen speed multiplier: a tremor-band oscillation whose depth is
    # velocity_jerk, over a small fixed noise floor. Low-jerk traces are
    # noise-dominated, so the oscillation survives per-record min-max
    # normalization only when the depth is genuinely large.
    jerk_freq = rng.uniform(4.0, 6.0)
    jerk_phase = rng.uniform(0, TWO_PI)
    multiplier = (
        1.0
        + params.velocity_jerk * np.sin(TWO_PI * jerk_freq * t + jerk_phase)
        + 0.03 * rng.standard_normal(n)
    )
    multiplier = np.clip(multiplier, 0.2, None)
    progress = np.concatenate(([0.0], np.cumsum(multiplier)[:-1]))
    progress /= progress[-1]

    # near-constant arc speed: arc length grows ~ theta^2 on this spiral
    theta_max = params.turns * TWO_PI
    theta = theta_max * np.sqrt(0.04 + 0.96 * progress)

    pen_gap = TWO_PI * params.radius_growth
    amp = params.tremor_amplitude * pen_gap
    tremor_phase = rng.uniform(0, TWO_PI)
    band = np.zeros(n)
    for _ in range(3):
        band += np.sin(TWO_PI * rng.uniform(4.0, 6.0) * t + rng.uniform(0, TWO_PI))
    radius = (
        params.radius_growth * theta
        + amp * np.sin(TWO_PI * params.tremor_freq_hz * t + tremor_phase)
        + 0.25 * amp * band / 3.0
    )
    x = radius * np.cos(theta)
    y = radius * np.sin(theta)

    pressure = np.clip(
        0.45
        + 0.25 * progress
        + params.pressure_wobble * np.sin(TWO_PI * 1.3 * t + rng.uniform(0, TWO_PI)),
        0.05,
        6.0,
    )
    altitude = np.clip(
        0.9 + 0.15 * np.sin(TWO_PI * 0.3 * t + rng.uniform(0, TWO_PI)),
        0.0,
        math.pi / 2,
    )
    azimuth = (theta + math.pi / 2) % TWO_PI  # pen heading follows the tangent

    samples = tuple(
        StylusSample(
            x=float(x[i]), y=float(y[i]), t=float(t[i]),
            pressure=float(pressure[i]), altitude=float(altitude[i]),
            azimuth=float(azimuth[i]),
        )
        for i in range(n)
    )
    record = DrawingRecord(
        samples=samples,
        label=label,
        subject_id=f"synth-{label.lower()}-{params.seed:05d}",
        task_id="ASD",
        source="Synthetic",
    )
    return validate_record(record)


def gen_cohort(
    n_pd: int, n_hc: int, seed: int = 0
) -> tuple[DatasetManifest, list[DrawingRecord]]:
    """Balanced labeled cohort; per-record parameters jittered from the seed.

    Manifest paths follow the layout write_cohort materializes
    (records/<subject>.csv relative to the manifest).
    """
    if n_pd < 1 or n_hc < 1:
        raise ValueError("need at least one record per class")
    rng = np.random.default_rng(seed)
    records: list[DrawingRecord] = []
    entries: list[ManifestEntry] = []
    for label, count, ranges in (("PD", n_pd, PD_LIKE), ("HC", n_hc, HC_LIKE)):
        for i in range(count):
            params = SpiralParams(
                turns=float(rng.uniform(3.5, 4.5)),
                tremor_amplitude=float(rng.uniform(*ranges["tremor_amplitude"])),
                tremor_freq_hz=float(rng.uniform(4.0, 6.0)),
                velocity_jerk=float(rng.uniform(*ranges["velocity_jerk"])),
                pressure_wobble=float(rng.uniform(*ranges["pressure_wobble"])),
                seed=int(rng.integers(0, 2**31 - 1)),
            )
            record = gen_spiral(params, label)
            record = DrawingRecord(
                samples=record.samples,
                label=label,
                subject_id=f"{label.lower()}{i:03d}",
                task_id="ASD",
                source="Synthetic",
            )
            records.append(record)
            entries.append(
                ManifestEntry(
                    path=f"records/{record.subject_id}.csv",
                    label=label,
                    subject_id=record.subject_id,
                    task_id="ASD",
                    source="Synthetic",
                )
            )
    return DatasetManifest(tuple(entries)), records


def write_cohort(
    directory: str | Path, manifest: DatasetManifest, records: list[DrawingRecord]
) -> Path:
    """Write record CSVs plus manifest.tsv; returns the manifest path."""
    directory = Path(directory)
    (directory / "records").mkdir(parents=True, exist_ok=True)
    for entry, record in zip(manifest.entries, records):
        (directory / entry.path).write_text(serialize_record(record))
    manifest_path = directory / "manifest.tsv"
    write_manifest(manifest_path, manifest.entries)
    return manifest_path
