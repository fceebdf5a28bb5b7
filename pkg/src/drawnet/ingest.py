"""Parsing, validation and indexing of raw stylus recordings.

Record files are UTF-8 CSV with a mandatory header. The DraWritePD schema
carries columns ``x,y,t,pressure,altitude,azimuth``; the PaHaW schema adds
a binary ``button`` column (1 = pen on surface). Synthetic records use the
DraWritePD column layout. Manifests are tab-separated lines of
``path<TAB>label<TAB>subject_id<TAB>task_id<TAB>source``.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from drawnet.errors import (
    DanglingPath,
    DuplicatePath,
    InvalidValue,
    MissingColumn,
    NonMonotoneTime,
    NonNumericCell,
    TooFewSamples,
    UnexpectedColumn,
    UnknownLabel,
)

LABELS = ("HC", "PD")  # index 0 = healthy control, 1 = positive class
SCHEMAS = ("DraWritePD", "PaHaW")
SOURCES = ("DraWritePD", "PaHaW", "Synthetic")

_BASE_COLUMNS = ("x", "y", "t", "pressure", "altitude", "azimuth")
TWO_PI = 2.0 * math.pi


def label_index(label: str) -> int:
    return LABELS.index(label)


@dataclass(frozen=True, slots=True)
class StylusSample:
    """One time-stamped pen measurement."""

    x: float
    y: float
    t: float
    pressure: float
    altitude: float
    azimuth: float
    button: int | None = None


@dataclass(frozen=True)
class DrawingRecord:
    """A validated, time-sorted stylus recording with its class label."""

    samples: tuple[StylusSample, ...]
    label: str
    subject_id: str
    task_id: str
    source: str

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def has_button(self) -> bool:
        return self.samples[0].button is not None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples], dtype=np.float64)


@dataclass(frozen=True)
class FeatureSet:
    """Which dynamic features feed the encoders.

    Positions are mandatory; the canonical channel order is
    x, y, azimuth, altitude, pressure, velocity.
    """

    x: bool = True
    y: bool = True
    azimuth: bool = False
    altitude: bool = False
    pressure: bool = False
    velocity: bool = False

    CANONICAL_ORDER = ("x", "y", "azimuth", "altitude", "pressure", "velocity")
    _LETTERS = {"x": "x", "y": "y", "a": "azimuth", "l": "altitude",
                "p": "pressure", "v": "velocity"}

    def __post_init__(self) -> None:
        if not (self.x and self.y):
            raise InvalidValue("x and y features are always enabled")

    def enabled(self) -> tuple[str, ...]:
        return tuple(n for n in self.CANONICAL_ORDER if getattr(self, n))

    def letters(self) -> str:
        rev = {v: k for k, v in self._LETTERS.items()}
        return "".join(rev[n] for n in self.enabled())

    @classmethod
    def from_letters(cls, letters: str) -> "FeatureSet":
        """Parse compact flags like ``xyv`` or ``xyalpv``."""
        flags = dict.fromkeys(cls._LETTERS.values(), False)
        for ch in letters.strip().lower():
            if ch in (" ", ",", "+"):
                continue
            if ch not in cls._LETTERS:
                raise InvalidValue(f"unknown feature letter {ch!r}")
            flags[cls._LETTERS[ch]] = True
        return cls(**flags)

    @classmethod
    def full(cls) -> "FeatureSet":
        return cls(True, True, True, True, True, True)

    @classmethod
    def positions(cls) -> "FeatureSet":
        return cls()


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: str
    subject_id: str
    task_id: str
    source: str


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...] = field(default_factory=tuple)

    def class_counts(self) -> dict[str, int]:
        counts = Counter(e.label for e in self.entries)
        return {label: counts.get(label, 0) for label in LABELS}

    def __len__(self) -> int:
        return len(self.entries)


def _parse_float(cell: str, row: int, col: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise NonNumericCell(f"row {row}, column {col!r}: {cell!r}") from None
    if not math.isfinite(value):
        raise NonNumericCell(f"row {row}, column {col!r}: non-finite {cell!r}")
    return value


def validate_record(record: DrawingRecord) -> DrawingRecord:
    """Check every invariant; returns the record unchanged on success."""
    if record.label not in LABELS:
        raise UnknownLabel(record.label)
    if record.source not in SOURCES:
        raise InvalidValue(f"unknown source {record.source!r}")
    if len(record.samples) < 2:
        raise TooFewSamples(f"{len(record.samples)} samples, need at least 2")
    button_presence = {s.button is None for s in record.samples}
    if len(button_presence) != 1:
        raise InvalidValue("button must be present for all samples or none")
    prev_t = -math.inf
    for i, s in enumerate(record.samples):
        for name in ("x", "y", "t", "pressure", "altitude", "azimuth"):
            if not math.isfinite(getattr(s, name)):
                raise InvalidValue(f"sample {i}: non-finite {name}")
        if s.t < prev_t:
            raise NonMonotoneTime(f"t decreases at sample {i}")
        prev_t = s.t
        if s.pressure < 0:
            raise InvalidValue(f"sample {i}: negative pressure")
        if not 0.0 <= s.altitude <= math.pi / 2:
            raise InvalidValue(f"sample {i}: altitude {s.altitude} outside [0, pi/2]")
        if not 0.0 <= s.azimuth <= TWO_PI:
            raise InvalidValue(f"sample {i}: azimuth {s.azimuth} not wrapped")
        if s.button is not None and s.button not in (0, 1):
            raise InvalidValue(f"sample {i}: button {s.button} not 0/1")
    return record


def parse_record(
    text: str | IO[str],
    schema: str,
    *,
    label: str = "HC",
    subject_id: str = "anon",
    task_id: str = "ASD",
    source: str | None = None,
) -> DrawingRecord:
    """Parse one record CSV and validate it.

    ``schema`` selects the expected column set. Azimuth is wrapped into
    [0, 2*pi); strictly decreasing timestamps are rejected, equal ones
    are kept (they are collapsed later, before velocity derivation).
    """
    if schema not in SCHEMAS:
        raise InvalidValue(f"unknown schema {schema!r}")
    expected = set(_BASE_COLUMNS) | ({"button"} if schema == "PaHaW" else set())

    stream = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.DictReader(stream)
    header = reader.fieldnames
    if header is None:
        raise MissingColumn("empty input, no header row")
    got = set(header)
    missing = expected - got
    if missing:
        raise MissingColumn(", ".join(sorted(missing)))
    extra = got - expected
    if extra:
        raise UnexpectedColumn(", ".join(sorted(extra)))

    samples: list[StylusSample] = []
    for rownum, row in enumerate(reader, start=1):
        if None in row:  # DictReader parks surplus cells under None
            raise NonNumericCell(f"row {rownum}: too many cells")
        if any(v is None for v in row.values()):
            raise NonNumericCell(f"row {rownum}: short row")
        values = {c: _parse_float(row[c], rownum, c) for c in _BASE_COLUMNS}
        values["azimuth"] = values["azimuth"] % TWO_PI
        button: int | None = None
        if schema == "PaHaW":
            raw = _parse_float(row["button"], rownum, "button")
            if raw not in (0.0, 1.0):
                raise InvalidValue(f"row {rownum}: button {raw} not 0/1")
            button = int(raw)
        samples.append(StylusSample(button=button, **values))

    record = DrawingRecord(
        samples=tuple(samples),
        label=label,
        subject_id=subject_id,
        task_id=task_id,
        source=source if source is not None else schema,
    )
    return validate_record(record)


def serialize_record(record: DrawingRecord) -> str:
    """Inverse of parse_record; floats via repr so round-trips are exact."""
    columns = list(_BASE_COLUMNS) + (["button"] if record.has_button else [])
    lines = [",".join(columns)]
    for s in record.samples:
        cells = [repr(getattr(s, c)) for c in _BASE_COLUMNS]
        if record.has_button:
            cells.append(str(s.button))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def filter_on_surface(record: DrawingRecord) -> DrawingRecord:
    """Keep only on-surface samples (button = 1, else pressure > 0)."""
    if record.has_button:
        kept = tuple(s for s in record.samples if s.button == 1)
    else:
        kept = tuple(s for s in record.samples if s.pressure > 0)
    if len(kept) < 2:
        raise TooFewSamples(f"{len(kept)} on-surface samples, need at least 2")
    return replace(record, samples=kept)


def _schema_for_source(source: str) -> str:
    return "PaHaW" if source == "PaHaW" else "DraWritePD"


def parse_manifest(path: str | Path) -> DatasetManifest:
    """Read a manifest without touching the referenced record files."""
    path = Path(path)
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise InvalidValue(f"{path}:{lineno}: expected 5 tab-separated fields")
        rec_path, label, subject_id, task_id, source = parts
        if label not in LABELS:
            raise UnknownLabel(f"{path}:{lineno}: {label!r}")
        if source not in SOURCES:
            raise InvalidValue(f"{path}:{lineno}: unknown source {source!r}")
        if rec_path in seen:
            raise DuplicatePath(f"{path}:{lineno}: {rec_path}")
        seen.add(rec_path)
        entries.append(ManifestEntry(rec_path, label, subject_id, task_id, source))
    return DatasetManifest(tuple(entries))


def load_manifest(
    path: str | Path,
    *,
    surface_filter: bool | None = None,
) -> tuple[DatasetManifest, list[DrawingRecord]]:
    """Parse a manifest and every record it references.

    Relative record paths are resolved against the manifest's directory.
    ``surface_filter`` defaults to on for PaHaW records (which carry the
    button channel) and off otherwise.
    """
    path = Path(path)
    manifest = parse_manifest(path)
    records: list[DrawingRecord] = []
    for entry_no, entry in enumerate(manifest.entries, start=1):
        rec_path = Path(entry.path)
        if not rec_path.is_absolute():
            rec_path = path.parent / rec_path
        if not rec_path.is_file():
            raise DanglingPath(f"{path} entry {entry_no}: {entry.path}")
        record = parse_record(
            rec_path.read_text(),
            _schema_for_source(entry.source),
            label=entry.label,
            subject_id=entry.subject_id,
            task_id=entry.task_id,
            source=entry.source,
        )
        apply_filter = surface_filter
        if apply_filter is None:
            apply_filter = entry.source == "PaHaW"
        if apply_filter:
            record = filter_on_surface(record)
        records.append(record)
    return manifest, records


def write_manifest(path: str | Path, entries: Iterable[ManifestEntry]) -> None:
    lines = [
        "\t".join((e.path, e.label, e.subject_id, e.task_id, e.source))
        for e in entries
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def class_counts(records: Sequence[DrawingRecord]) -> dict[str, int]:
    counts = Counter(r.label for r in records)
    return {label: counts.get(label, 0) for label in LABELS}
