"""IMU recordings: CSV/manifest ingestion, recording-level split, synthetic generator."""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence, TextIO

import numpy as np

from gaitml.errors import (
    DurationTooShort,
    EmptyFile,
    GaitError,
    InsufficientRecordings,
    MissingColumn,
    NonMonotonicTimestamps,
    RateMismatch,
)

ACC_COLUMNS = ("accX", "accY", "accZ")
GYRO_COLUMNS = ("gyrX", "gyrY", "gyrZ")
TIME_COLUMN = "timestamp_ms"

# relative jitter allowed on consecutive timestamp deltas
JITTER_TOLERANCE = 0.10


class ActivityLabel(enum.IntEnum):
    """The four activities. Integer value is the class index used everywhere."""

    GOING_DOWNSTAIRS = 0
    GOING_UPSTAIRS = 1
    STATIONARY = 2
    WALKING = 3

    @property
    def display(self) -> str:
        return _DISPLAY[self]

    @classmethod
    def from_display(cls, text: str) -> "ActivityLabel":
        try:
            return _BY_DISPLAY[text]
        except KeyError:
            raise GaitError(f"unknown activity label {text!r}") from None

    @classmethod
    def display_names(cls) -> list[str]:
        return [lab.display for lab in cls]


_DISPLAY = {
    ActivityLabel.GOING_DOWNSTAIRS: "Going Downstairs",
    ActivityLabel.GOING_UPSTAIRS: "Going Upstairs",
    ActivityLabel.STATIONARY: "Stationary",
    ActivityLabel.WALKING: "Walking",
}
_BY_DISPLAY = {v: k for k, v in _DISPLAY.items()}


@dataclass(frozen=True)
class Sample:
    """One IMU reading. Acceleration in g, angular rate in deg/s."""

    t_ms: int
    ax: float
    ay: float
    az: float
    gx: float | None = None
    gy: float | None = None
    gz: float | None = None

    def __post_init__(self):
        gyro = (self.gx, self.gy, self.gz)
        n_gyro = sum(g is not None for g in gyro)
        if n_gyro not in (0, 3):
            raise GaitError("gyro fields must be all present or all absent")
        if self.t_ms < 0:
            raise GaitError("timestamp must be non-negative")
        if not all(math.isfinite(v) for v in self.values()):
            raise GaitError("sample values must be finite")

    @property
    def axes(self) -> int:
        return 3 if self.gx is None else 6

    def values(self) -> tuple[float, ...]:
        acc = (self.ax, self.ay, self.az)
        if self.gx is None:
            return acc
        return acc + (self.gx, self.gy, self.gz)


@dataclass(frozen=True, eq=False)
class Recording:
    """A labeled, uniformly sampled IMU time series.

    ``t_ms`` has shape (n,) and ``data`` shape (n, axes); both are read-only.
    """

    id: str
    label: ActivityLabel
    rate_hz: float
    t_ms: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        t = np.array(self.t_ms, dtype=np.int64)
        x = np.array(self.data, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] not in (3, 6):
            raise GaitError(f"data must have shape (n, 3) or (n, 6), got {x.shape}")
        if t.shape != (x.shape[0],):
            raise GaitError("timestamp and data lengths differ")
        if x.shape[0] == 0:
            raise EmptyFile(f"recording {self.id!r} has no samples")
        if not np.all(np.isfinite(x)):
            raise GaitError(f"recording {self.id!r} contains non-finite values")
        if t[0] < 0:
            raise GaitError("timestamps must be non-negative")
        check_timestamps(t, self.rate_hz)
        t.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "t_ms", t)
        object.__setattr__(self, "data", x)
        object.__setattr__(self, "label", ActivityLabel(self.label))

    @property
    def axes(self) -> int:
        return self.data.shape[1]

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.rate_hz

    @property
    def duration_ms(self) -> float:
        return self.n_samples * 1000.0 / self.rate_hz

    def samples(self) -> Iterator[Sample]:
        for t, row in zip(self.t_ms.tolist(), self.data.tolist()):
            yield Sample(t, *row)


def check_timestamps(t_ms: np.ndarray, rate_hz: float) -> None:
    """Raise unless timestamps increase strictly at ~1000/rate_hz ms per step.

    Deltas may deviate from the nominal period by 10%, or by up to 1 ms when
    that is larger, since integer-millisecond stamps cannot represent
    periods such as 3.33 ms exactly.
    """
    if not rate_hz > 0:
        raise GaitError(f"rate_hz must be positive, got {rate_hz}")
    if len(t_ms) < 2:
        return
    deltas = np.diff(t_ms)
    if np.any(deltas <= 0):
        i = int(np.argmax(deltas <= 0))
        raise NonMonotonicTimestamps(
            f"timestamp at row {i + 1} ({t_ms[i + 1]}) does not exceed previous ({t_ms[i]})"
        )
    period = 1000.0 / rate_hz
    tol = max(JITTER_TOLERANCE * period, 1.0)
    bad = np.abs(deltas - period) > tol + 1e-9
    if np.any(bad):
        i = int(np.argmax(bad))
        raise RateMismatch(
            f"timestamp delta {deltas[i]} ms at row {i + 1} deviates from "
            f"{period:.3f} ms (rate {rate_hz} Hz) by more than {tol:.3f} ms"
        )


def _parse_csv(fh: TextIO, source: str) -> Iterator[tuple[int, list[float]]]:
    """Validate the header, then yield (timestamp_ms, values) per data row."""
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or not any(h.strip() for h in header):
        raise EmptyFile(f"{source}: file is empty")
    header = [h.strip() for h in header]
    for col in (TIME_COLUMN,) + ACC_COLUMNS:
        if col not in header:
            raise MissingColumn(f"{source}: missing column {col!r}")
    present = [c in header for c in GYRO_COLUMNS]
    if any(present) and not all(present):
        missing = [c for c, p in zip(GYRO_COLUMNS, present) if not p]
        raise MissingColumn(f"{source}: missing column {missing[0]!r}")
    cols = ACC_COLUMNS + (GYRO_COLUMNS if all(present) else ())
    idx = [header.index(c) for c in cols]
    t_idx = header.index(TIME_COLUMN)
    for lineno, row in enumerate(reader, start=2):
        if not row or not any(cell.strip() for cell in row):
            continue
        try:
            ts = float(row[t_idx])
            values = [float(row[i]) for i in idx]
        except (ValueError, IndexError) as exc:
            raise GaitError(f"{source}:{lineno}: malformed row ({exc})") from None
        if ts != int(ts):
            raise GaitError(f"{source}:{lineno}: timestamp must be an integer")
        yield int(ts), values


def iter_samples(fh: TextIO, source: str = "<stream>") -> Iterator[Sample]:
    """Samples from an open recording CSV, one at a time (for streaming replay)."""
    for t, values in _parse_csv(fh, source):
        yield Sample(t, *values)


def load_recording(
    path: str | Path,
    rate_hz: float,
    label: ActivityLabel,
    recording_id: str | None = None,
) -> Recording:
    """Read a recording CSV (``timestamp_ms,accX,accY,accZ[,gyrX,gyrY,gyrZ]``)."""
    path = Path(path)
    with path.open(newline="") as fh:
        parsed = list(_parse_csv(fh, str(path)))
    if not parsed:
        raise EmptyFile(f"{path}: no samples")
    return Recording(
        id=recording_id if recording_id is not None else path.stem,
        label=ActivityLabel(label),
        rate_hz=float(rate_hz),
        t_ms=np.asarray([t for t, _ in parsed], dtype=np.int64),
        data=np.asarray([v for _, v in parsed], dtype=np.float64),
    )


def write_recording(rec: Recording, path: str | Path) -> None:
    cols = (TIME_COLUMN,) + ACC_COLUMNS + (GYRO_COLUMNS if rec.axes == 6 else ())
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for t, row in zip(rec.t_ms.tolist(), rec.data.tolist()):
            w.writerow([t] + [repr(v) for v in row])


@dataclass(frozen=True)
class Dataset:
    recordings: tuple[Recording, ...]
    manifest_path: Path | None = None

    def __post_init__(self):
        recs = tuple(self.recordings)
        object.__setattr__(self, "recordings", recs)
        ids = [r.id for r in recs]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise GaitError(f"duplicate recording id {dup!r}")
        if len({r.rate_hz for r in recs}) > 1:
            raise GaitError("recordings have differing rate_hz")
        if len({r.axes for r in recs}) > 1:
            raise GaitError("recordings have differing axis counts")

    def __len__(self) -> int:
        return len(self.recordings)

    def __iter__(self) -> Iterator[Recording]:
        return iter(self.recordings)

    @property
    def rate_hz(self) -> float:
        return self.recordings[0].rate_hz

    @property
    def axes(self) -> int:
        return self.recordings[0].axes

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.recordings]

    def by_label(self) -> dict[ActivityLabel, list[Recording]]:
        out: dict[ActivityLabel, list[Recording]] = {lab: [] for lab in ActivityLabel}
        for r in self.recordings:
            out[r.label].append(r)
        return out

    def subset(self, ids: Sequence[str]) -> "Dataset":
        wanted = set(ids)
        return Dataset(tuple(r for r in self.recordings if r.id in wanted), self.manifest_path)


def load_manifest(path: str | Path) -> Dataset:
    """Load every recording listed in a manifest JSON. File paths are relative
    to the manifest's directory."""
    path = Path(path)
    doc = json.loads(path.read_text())
    rate = float(doc["rate_hz"])
    axes = int(doc.get("axes", 3))
    recs = []
    for entry in doc["recordings"]:
        rec = load_recording(
            path.parent / entry["file"],
            rate,
            ActivityLabel.from_display(entry["label"]),
            recording_id=entry.get("id"),
        )
        if rec.axes != axes:
            raise GaitError(f"{entry['file']}: has {rec.axes} axes, manifest says {axes}")
        recs.append(rec)
    return Dataset(tuple(recs), manifest_path=path)


def write_manifest(ds: Dataset, path: str | Path, files: Mapping[str, str]) -> None:
    """Write a manifest; ``files`` maps recording id to its path relative to the manifest."""
    doc = {
        "rate_hz": ds.rate_hz,
        "axes": ds.axes,
        "recordings": [
            {"file": files[r.id], "label": r.label.display, "id": r.id} for r in ds
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_by_recording(
    ds: Dataset, train_fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    """Stratified train/test split over whole recordings.

    Each class contributes round-half-up(n_class * train_fraction) recordings
    to train and the rest to test. Windows are never split, so overlapping
    windows of one recording cannot leak across partitions.
    """
    if not 0.0 < train_fraction < 1.0:
        raise GaitError(f"train_fraction must be in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    train_ids: set[str] = set()
    for lab, recs in ds.by_label().items():
        if not recs:
            continue
        n = len(recs)
        n_train = _round_half_up(n * train_fraction)
        if n_train >= n or n_train == 0:
            raise InsufficientRecordings(
                f"class {lab.display!r} has {n} recording(s); fraction {train_fraction} "
                f"leaves an empty {'test' if n_train >= n else 'train'} partition"
            )
        ids = sorted(r.id for r in recs)
        order = rng.permutation(n)
        train_ids.update(ids[i] for i in order[:n_train])
    train = tuple(r for r in ds if r.id in train_ids)
    test = tuple(r for r in ds if r.id not in train_ids)
    return Dataset(train, ds.manifest_path), Dataset(test, ds.manifest_path)


# --- synthetic generator -------------------------------------------------


@dataclass(frozen=True)
class GaitTemplate:
    """Periodic acceleration template for one activity (g, Hz, rad, deg/s)."""

    freq_hz: float = 0.0
    vertical_amp: float = 0.0
    forward_amp: float = 0.0
    forward_phase: float = 0.0
    vertical_bias: float = 0.0
    gyro_amp: float = 0.0


DEFAULT_TEMPLATES: dict[ActivityLabel, GaitTemplate] = {
    ActivityLabel.STATIONARY: GaitTemplate(),
    ActivityLabel.WALKING: GaitTemplate(2.0, 0.4, 0.2, math.pi / 2, 0.0, 30.0),
    ActivityLabel.GOING_UPSTAIRS: GaitTemplate(1.4, 0.6, 0.2, math.pi / 2, 0.05, 40.0),
    ActivityLabel.GOING_DOWNSTAIRS: GaitTemplate(1.8, 0.5, 0.2, -math.pi / 2, -0.05, 35.0),
}


@dataclass(frozen=True)
class SynthConfig:
    templates: Mapping[ActivityLabel, GaitTemplate] = field(
        default_factory=lambda: dict(DEFAULT_TEMPLATES)
    )
    gravity_g: float = 1.0
    noise_sigma: float = 0.02
    gyro_noise_sigma: float = 0.5
    # a random starting phase per recording; off gives phase 0 everywhere
    random_phase: bool = True
    axes: int = 3
    min_duration_s: float = 2.0


def synthesize_recording(
    label: ActivityLabel,
    duration_s: float,
    rate_hz: float,
    seed: int,
    config: SynthConfig | None = None,
    recording_id: str | None = None,
) -> Recording:
    """Parametric stand-in for a real capture: gravity on Z, a vertical (Z) and
    forward (X) sinusoid at the step frequency, Gaussian noise on every axis."""
    cfg = config or SynthConfig()
    if not 25 <= rate_hz <= 400:
        raise GaitError(f"rate_hz must lie in [25, 400], got {rate_hz}")
    if duration_s < cfg.min_duration_s:
        raise DurationTooShort(
            f"duration {duration_s} s is shorter than one window ({cfg.min_duration_s} s)"
        )
    label = ActivityLabel(label)
    tpl = cfg.templates[label]
    n = int(round(duration_s * rate_hz))
    rng = np.random.default_rng(seed)
    phase0 = rng.uniform(0.0, 2 * math.pi) if cfg.random_phase else 0.0
    t = np.arange(n) / rate_hz
    arg = 2 * math.pi * tpl.freq_hz * t + phase0

    acc = rng.normal(0.0, cfg.noise_sigma, size=(n, 3))
    acc[:, 2] += cfg.gravity_g + tpl.vertical_bias + tpl.vertical_amp * np.sin(arg)
    acc[:, 0] += tpl.forward_amp * np.sin(arg + tpl.forward_phase)
    data = acc
    if cfg.axes == 6:
        gyro = rng.normal(0.0, cfg.gyro_noise_sigma, size=(n, 3))
        gyro[:, 1] += tpl.gyro_amp * np.sin(arg + tpl.forward_phase)
        data = np.hstack([acc, gyro])
    elif cfg.axes != 3:
        raise GaitError(f"axes must be 3 or 6, got {cfg.axes}")

    t_ms = np.rint(np.arange(n) * 1000.0 / rate_hz).astype(np.int64)
    rid = recording_id or f"{label.name.lower()}_{seed}"
    return Recording(rid, label, float(rate_hz), t_ms, data)


def synthesize_dataset(
    per_class: int = 10,
    duration_s: float = 10.0,
    rate_hz: float = 100.0,
    seed: int = 42,
    config: SynthConfig | None = None,
) -> Dataset:
    """``per_class`` recordings for each activity; sub-seeds derive from ``seed``."""
    seeds = np.random.SeedSequence(seed).generate_state(per_class * len(ActivityLabel))
    recs = []
    for li, lab in enumerate(ActivityLabel):
        for j in range(per_class):
            s = int(seeds[li * per_class + j])
            rid = f"{lab.name.lower()}_{j:02d}"
            recs.append(synthesize_recording(lab, duration_s, rate_hz, s, config, rid))
    return Dataset(tuple(recs))
