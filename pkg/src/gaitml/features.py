"""Per-window spectral/statistical features and z-score normalization.

Layout per axis (13 values with the defaults)::

    mean, std, rms, peak1_freq_hz, peak1_mag, peak2_freq_hz, peak2_mag,
    band_power_1 .. band_power_6

Axes are concatenated in recording column order, so a 3-axis window gives 39
features and a 6-axis window 78.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from gaitml.errors import (
    DimensionMismatch,
    EmptySeries,
    EmptyTrainingSet,
    GaitError,
    SeriesTooLong,
)
from gaitml.fft import is_power_of_two, rfft

# (low, high) in Hz; high=None means the Nyquist frequency, inclusive
DEFAULT_BANDS: tuple[tuple[float, float | None], ...] = (
    (0.5, 1.0),
    (1.0, 2.0),
    (2.0, 4.0),
    (4.0, 8.0),
    (8.0, 16.0),
    (16.0, None),
)

TAPERS = ("rectangular", "hann")
AXIS_NAMES = ("accX", "accY", "accZ", "gyrX", "gyrY", "gyrZ")


@dataclass(frozen=True)
class FeatureConfig:
    n_fft: int = 256
    peaks_k: int = 2
    bands: tuple[tuple[float, float | None], ...] = DEFAULT_BANDS
    taper: str = "hann"

    def __post_init__(self):
        object.__setattr__(
            self, "bands", tuple((float(lo), None if hi is None else float(hi)) for lo, hi in self.bands)
        )
        if not is_power_of_two(self.n_fft) or self.n_fft < 2:
            raise GaitError(f"n_fft must be a power of two >= 2, got {self.n_fft}")
        if self.peaks_k < 1:
            raise GaitError("peaks_k must be >= 1")
        if self.taper not in TAPERS:
            raise GaitError(f"taper must be one of {TAPERS}, got {self.taper!r}")
        prev_hi = 0.0
        for i, (lo, hi) in enumerate(self.bands):
            if lo < prev_hi or (hi is not None and hi <= lo):
                raise GaitError(f"bands must be ascending and non-overlapping (band {i})")
            if hi is None and i != len(self.bands) - 1:
                raise GaitError("only the last band may extend to Nyquist")
            prev_hi = hi if hi is not None else float("inf")

    @property
    def per_axis(self) -> int:
        return 3 + 2 * self.peaks_k + len(self.bands)

    def n_features(self, axes: int) -> int:
        return self.per_axis * axes

    def feature_names(self, axes: int) -> list[str]:
        names = []
        for a in AXIS_NAMES[:axes]:
            names += [f"{a}_mean", f"{a}_std", f"{a}_rms"]
            for k in range(1, self.peaks_k + 1):
                names += [f"{a}_peak{k}_freq_hz", f"{a}_peak{k}_mag"]
            names += [f"{a}_band_power_{b}" for b in range(1, len(self.bands) + 1)]
        return names

    def check_bands(self, rate_hz: float) -> None:
        nyq = rate_hz / 2
        for lo, hi in self.bands:
            if (hi if hi is not None else lo) > nyq:
                raise GaitError(f"band ({lo}, {hi}) exceeds Nyquist {nyq} Hz")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bands"] = [list(b) for b in self.bands]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        return cls(
            n_fft=int(d["n_fft"]),
            peaks_k=int(d["peaks_k"]),
            bands=tuple(tuple(b) for b in d["bands"]),
            taper=d["taper"],
        )


def rms(series) -> float:
    x = np.asarray(series, dtype=np.float64)
    if x.size == 0:
        raise EmptySeries("rms of an empty series")
    return float(np.sqrt(np.mean(x * x)))


def _taper(n: int, kind: str) -> np.ndarray:
    if kind == "hann":
        return np.hanning(n)
    return np.ones(n)


def fft_magnitude(series, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """|X_k| for k = 0..n_fft/2 of the mean-removed, tapered, zero-padded series.

    Accepts a 1-D series or a 2-D array of series along the last axis.
    """
    x = np.asarray(series, dtype=np.float64)
    n = x.shape[-1]
    if n == 0:
        raise EmptySeries("empty series")
    if n > cfg.n_fft:
        raise SeriesTooLong(f"series of length {n} exceeds n_fft={cfg.n_fft}")
    x = x - x.mean(axis=-1, keepdims=True)
    x = x * _taper(n, cfg.taper)
    return np.abs(rfft(x, cfg.n_fft))


def bin_frequencies(n_bins: int, rate_hz: float) -> np.ndarray:
    """Center frequency of each bin of a one-sided spectrum with ``n_bins`` bins."""
    n_fft = 2 * (n_bins - 1)
    return np.arange(n_bins) * rate_hz / n_fft


def spectral_peaks(spectrum, rate_hz: float, k: int = 2) -> list[tuple[float, float]]:
    """The ``k`` largest strict local maxima among bins 1..n/2-1.

    Sorted by descending magnitude, ties to the lower frequency, and padded
    with (0.0, 0.0) when fewer than ``k`` maxima exist.
    """
    m = np.asarray(spectrum, dtype=np.float64)
    if k < 1:
        raise GaitError("k must be >= 1")
    inner = np.arange(1, len(m) - 1)
    is_max = (m[inner] > m[inner - 1]) & (m[inner] > m[inner + 1])
    cand = inner[is_max]
    # lexsort: last key is primary
    order = np.lexsort((cand, -m[cand]))
    freqs = bin_frequencies(len(m), rate_hz)
    out = [(float(freqs[i]), float(m[i])) for i in cand[order][:k]]
    out += [(0.0, 0.0)] * (k - len(out))
    return out


def _band_masks(n_bins: int, rate_hz: float, bands) -> np.ndarray:
    freqs = bin_frequencies(n_bins, rate_hz)
    nyq = rate_hz / 2
    masks = np.zeros((len(bands), n_bins), dtype=bool)
    for b, (lo, hi) in enumerate(bands):
        if hi is None or hi >= nyq:
            masks[b] = (freqs >= lo) & (freqs <= nyq)
        else:
            masks[b] = (freqs >= lo) & (freqs < hi)
    masks[:, 0] = False
    return masks


def band_power(spectrum, rate_hz: float, bands=DEFAULT_BANDS) -> np.ndarray:
    """Sum of |X_k|^2 / n_fft over bins whose center lies in each band.

    The DC bin is always excluded. A band ending at (or past) Nyquist
    includes the Nyquist bin. Works on the last axis of ``spectrum``.
    """
    m = np.asarray(spectrum, dtype=np.float64)
    n_bins = m.shape[-1]
    n_fft = 2 * (n_bins - 1)
    masks = _band_masks(n_bins, rate_hz, bands)
    return (m * m) @ masks.T.astype(np.float64) / n_fft


def extract_array(samples: np.ndarray, rate_hz: float, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """Features for one window given as a (window_samples, axes) array."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch(f"window must be 2-D (samples, axes), got shape {x.shape}")
    axes_first = x.T
    mean = axes_first.mean(axis=1)
    std = axes_first.std(axis=1)
    root_ms = np.sqrt(np.mean(axes_first * axes_first, axis=1))
    spec = fft_magnitude(axes_first, cfg)
    bp = band_power(spec, rate_hz, cfg.bands)
    out = np.empty((x.shape[1], cfg.per_axis))
    out[:, 0] = mean
    out[:, 1] = std
    out[:, 2] = root_ms
    for a in range(x.shape[1]):
        peaks = spectral_peaks(spec[a], rate_hz, cfg.peaks_k)
        out[a, 3 : 3 + 2 * cfg.peaks_k] = np.ravel(peaks)
    out[:, 3 + 2 * cfg.peaks_k :] = bp
    return out.ravel()


def extract_features(window, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """Feature vector of a :class:`~gaitml.windowing.Window`."""
    return extract_array(window.samples, window.rate_hz, cfg)


def extract_many(windows, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    if not windows:
        raise GaitError("no windows to featurize")
    cfg.check_bands(windows[0].rate_hz)
    return np.stack([extract_features(w, cfg) for w in windows])


@dataclass(frozen=True, eq=False)
class Normalizer:
    mean: np.ndarray
    std: np.ndarray
    epsilon: float = 1e-8

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64)
        std = np.array(self.std, dtype=np.float64)
        if mean.shape != std.shape or mean.ndim != 1:
            raise DimensionMismatch("mean and std must be 1-D and equally sized")
        if not self.epsilon > 0 or np.any(std < self.epsilon):
            raise GaitError("std entries must be >= epsilon > 0")
        mean.setflags(write=False)
        std.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def apply(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape[-1] != self.dim:
            raise DimensionMismatch(f"expected {self.dim} features, got {v.shape[-1]}")
        return (v - self.mean) / self.std

    __call__ = apply

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "epsilon": self.epsilon}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(np.asarray(d["mean"]), np.asarray(d["std"]), float(d["epsilon"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "Normalizer":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_normalizer(train, epsilon: float = 1e-8) -> Normalizer:
    x = np.asarray(train, dtype=np.float64)
    if x.size == 0 or x.ndim != 2 or x.shape[0] == 0:
        raise EmptyTrainingSet("cannot fit a normalizer on an empty training set")
    mean = x.mean(axis=0)
    # pin the mean of constant columns to the exact value so they map to 0.0
    constant = np.all(x == x[0], axis=0)
    mean = np.where(constant, x[0], mean)
    std = np.maximum(x.std(axis=0), epsilon)
    return Normalizer(mean, std, epsilon)


def write_feature_csv(path: str | Path, windows, features: np.ndarray) -> None:
    """Dump ``recording_id,start_ms,label,f0..fN`` rows."""
    features = np.asarray(features)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["recording_id", "start_ms", "label"] + [f"f{i}" for i in range(features.shape[1])])
        for win, row in zip(windows, features):
            w.writerow([win.recording_id, f"{win.start_ms:g}", win.label.display] + [repr(float(v)) for v in row])
