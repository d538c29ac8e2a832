"""Fixed-length, strided windows over a recording."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gaitml.dataset import ActivityLabel, Recording
from gaitml.errors import GaitError, InvalidStrideForRate, RecordingTooShort


@dataclass(frozen=True)
class WindowConfig:
    window_ms: float = 2000.0
    stride_ms: float = 80.0

    def __post_init__(self):
        if not self.window_ms > 0:
            raise GaitError(f"window_ms must be positive, got {self.window_ms}")
        if not 0 < self.stride_ms <= self.window_ms:
            raise GaitError(
                f"stride_ms must be in (0, window_ms], got {self.stride_ms}"
            )

    def window_samples(self, rate_hz: float) -> int:
        return _ms_to_samples(self.window_ms, rate_hz, "window")

    def stride_samples(self, rate_hz: float) -> int:
        return _ms_to_samples(self.stride_ms, rate_hz, "stride")


def _ms_to_samples(ms: float, rate_hz: float, what: str) -> int:
    exact = ms * rate_hz / 1000.0
    n = int(round(exact))
    if n < 1 or abs(exact - n) > 1e-9:
        raise InvalidStrideForRate(
            f"{what} of {ms} ms is not a whole number of samples at {rate_hz} Hz"
        )
    return n


@dataclass(frozen=True, eq=False)
class Window:
    recording_id: str
    label: ActivityLabel
    rate_hz: float
    start_ms: float
    start_index: int
    t_ms: np.ndarray
    samples: np.ndarray  # (window_samples, axes), a read-only view into the recording

    @property
    def end_ms(self) -> int:
        """Timestamp of the last sample in the window."""
        return int(self.t_ms[-1])


def window_count(duration: int, window: int, stride: int) -> int:
    """Number of complete windows; all arguments in the same unit."""
    if duration < window:
        return 0
    return (duration - window) // stride + 1


def segment(rec: Recording, cfg: WindowConfig) -> list[Window]:
    """Cut ``rec`` into complete windows. Trailing partial windows are dropped."""
    w = cfg.window_samples(rec.rate_hz)
    s = cfg.stride_samples(rec.rate_hz)
    n = rec.n_samples
    if n < w:
        raise RecordingTooShort(
            f"recording {rec.id!r} has {n} samples, window needs {w}"
        )
    out = []
    for i in range(window_count(n, w, s)):
        start = i * s
        out.append(
            Window(
                recording_id=rec.id,
                label=rec.label,
                rate_hz=rec.rate_hz,
                start_ms=start * 1000.0 / rec.rate_hz,
                start_index=start,
                t_ms=rec.t_ms[start : start + w],
                samples=rec.data[start : start + w],
            )
        )
    return out


def segment_all(recs, cfg: WindowConfig) -> list[Window]:
    return [w for rec in recs for w in segment(rec, cfg)]


def stack_windows(windows: list[Window]) -> np.ndarray:
    """(n_windows, window_samples, axes) copy of the window samples."""
    if not windows:
        raise GaitError("no windows to stack")
    return np.stack([w.samples for w in windows])
