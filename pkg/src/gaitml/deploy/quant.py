"""Per-row symmetric int8 weight quantization."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from gaitml.errors import GaitError, InvalidDims
from gaitml.model import MlpModel, _check_input

QMAX = 127
SCALE_FLOOR = 1e-12
PROB_LEVELS = 256


@dataclass(eq=False)
class QuantModel:
    """int8 weights with one positive scale per output row; float64 biases.

    Dequantized weight is ``q * scale[row]``. Drop-in for
    :class:`~gaitml.model.MlpModel` wherever only ``logits`` is needed.
    """

    dims: tuple[int, ...]
    qweights: list[np.ndarray]
    scales: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        n = len(self.dims) - 1
        if not len(self.qweights) == len(self.scales) == len(self.biases) == n:
            raise InvalidDims("one weight/scale/bias set per layer transition")
        for i in range(n):
            q, s, b = self.qweights[i], self.scales[i], self.biases[i]
            if q.dtype != np.int8 or q.shape != (self.dims[i + 1], self.dims[i]):
                raise InvalidDims(f"layer {i}: weights must be int8 of shape {(self.dims[i + 1], self.dims[i])}")
            if s.shape != (self.dims[i + 1],) or b.shape != (self.dims[i + 1],):
                raise InvalidDims(f"layer {i}: scale/bias length must be {self.dims[i + 1]}")
            if np.any(q == -128):
                raise GaitError("int8 weights must lie in [-127, 127]")
            if not np.all(s > 0):
                raise GaitError("scales must be positive")

    @property
    def n_params(self) -> int:
        return sum(q.size + b.size for q, b in zip(self.qweights, self.biases))

    @cached_property
    def _dequantized(self) -> list[np.ndarray]:
        return [q.astype(np.float64) * s[:, None] for q, s in zip(self.qweights, self.scales)]

    def dequantized_weights(self) -> list[np.ndarray]:
        return [w.copy() for w in self._dequantized]

    def logits(self, x) -> np.ndarray:
        h = _check_input(x, self.dims[0])
        last = len(self.qweights) - 1
        for i, (w, b) in enumerate(zip(self._dequantized, self.biases)):
            h = h @ w.T + b
            if i < last:
                h = np.maximum(h, 0.0)
        return h


def quantize(m: MlpModel) -> QuantModel:
    """scale = max|row| / 127 (floored at 1e-12); q = round(w / scale)."""
    qw, sc = [], []
    for w in m.weights:
        if not np.all(np.isfinite(w)):
            raise GaitError("cannot quantize non-finite weights")
        scale = np.maximum(np.max(np.abs(w), axis=1) / QMAX, SCALE_FLOOR)
        q = np.clip(np.rint(w / scale[:, None]), -QMAX, QMAX).astype(np.int8)
        qw.append(q)
        sc.append(scale)
    return QuantModel(m.dims, qw, sc, [b.copy() for b in m.biases])


def quantize_probs(p) -> np.ndarray:
    """Round probabilities to the nearest multiple of 1/256 (halves round up)."""
    p = np.asarray(p, dtype=np.float64)
    return np.floor(p * PROB_LEVELS + 0.5) / PROB_LEVELS
