"""Sample-by-sample inference with serial-monitor style output."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from gaitml.anomaly import anomaly_score
from gaitml.dataset import Sample
from gaitml.errors import DimensionMismatch, OutOfOrderSample
from gaitml.features import extract_array
from gaitml.model import forward
from gaitml.deploy.bundle import ModelBundle
from gaitml.deploy.quant import quantize_probs


@dataclass(frozen=True)
class ClassificationEvent:
    probs: tuple[float, ...]  # on the 1/256 grid
    raw_probs: tuple[float, ...]
    anomaly_score: float
    t_end_ms: int
    labels: tuple[str, ...]
    dsp_ms: float = 0.0
    classify_ms: float = 0.0
    anomaly_ms: float = 0.0

    @property
    def top(self) -> int:
        return int(np.argmax(self.probs))

    @property
    def top_label(self) -> str:
        return self.labels[self.top]


def infer_window(b: ModelBundle, samples: np.ndarray, t_end_ms: int = 0) -> ClassificationEvent:
    """featurize -> normalize -> classify -> 1/256 rounding -> anomaly score.

    Both the streaming engine and batch evaluation go through here, which is
    what makes their outputs identical.
    """
    clock = time.perf_counter
    t0 = clock()
    feats = b.normalizer.apply(extract_array(samples, b.rate_hz, b.feature_cfg))
    t1 = clock()
    raw = forward(b.classifier, feats)
    t2 = clock()
    score = anomaly_score(b.anomaly, feats)
    t3 = clock()
    return ClassificationEvent(
        probs=tuple(quantize_probs(raw).tolist()),
        raw_probs=tuple(raw.tolist()),
        anomaly_score=float(score),
        t_end_ms=int(t_end_ms),
        labels=b.labels,
        dsp_ms=(t1 - t0) * 1e3,
        classify_ms=(t2 - t1) * 1e3,
        anomaly_ms=(t3 - t2) * 1e3,
    )


def classify_windows(b: ModelBundle, windows) -> list[ClassificationEvent]:
    return [infer_window(b, w.samples, w.end_ms) for w in windows]


class StreamEngine:
    """Ring buffer of one window; emits an event every stride once full.

    Single consumer: push samples from one thread only.
    """

    def __init__(self, bundle: ModelBundle):
        self.bundle = bundle
        self.window = bundle.window_cfg.window_samples(bundle.rate_hz)
        self.stride = bundle.window_cfg.stride_samples(bundle.rate_hz)
        self._buf = np.zeros((self.window, bundle.axes))
        self._pos = 0
        self.count = 0
        self.last_t_ms: int | None = None

    def reset(self) -> None:
        self._buf[:] = 0.0
        self._pos = 0
        self.count = 0
        self.last_t_ms = None

    def _ordered(self) -> np.ndarray:
        return np.concatenate([self._buf[self._pos :], self._buf[: self._pos]])

    def push(self, s: Sample) -> ClassificationEvent | None:
        if self.last_t_ms is not None and s.t_ms <= self.last_t_ms:
            raise OutOfOrderSample(f"sample at {s.t_ms} ms after {self.last_t_ms} ms")
        values = s.values()
        if len(values) != self._buf.shape[1]:
            raise DimensionMismatch(f"sample has {len(values)} axes, model expects {self._buf.shape[1]}")
        self._buf[self._pos] = values
        self._pos = (self._pos + 1) % self.window
        self.count += 1
        self.last_t_ms = s.t_ms
        if self.count >= self.window and (self.count - self.window) % self.stride == 0:
            return infer_window(self.bundle, self._ordered(), s.t_ms)
        return None

    def run(self, samples: Iterable[Sample]) -> Iterator[ClassificationEvent]:
        for s in samples:
            ev = self.push(s)
            if ev is not None:
                yield ev


def stream_push(e: StreamEngine, s: Sample) -> ClassificationEvent | None:
    return e.push(s)


def format_event(ev: ClassificationEvent) -> str:
    lines = [
        f"Predictions (DSP: {round(ev.dsp_ms)} ms., Classification: {round(ev.classify_ms)} ms., "
        f"Anomaly: {round(ev.anomaly_ms)} ms.):"
    ]
    for name, p in zip(ev.labels, ev.probs):
        lines.append(f"    {name}: {abs(p):.5f}")
    lines.append(f"    anomaly score: {ev.anomaly_score:.3f}")
    return "\n".join(lines)
