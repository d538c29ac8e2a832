"""Dense ReLU network with softmax output, trained by minibatch Adam."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from gaitml.errors import DimensionMismatch, EmptyDataset, GaitError, InvalidDims

DEFAULT_DIMS = (39, 20, 10, 4)
LOSS_FLOOR = 1e-12


@dataclass(eq=False)
class MlpModel:
    """Weights are stored (fan_out, fan_in) per layer; hidden layers use ReLU."""

    dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if len(self.weights) != len(self.dims) - 1 or len(self.biases) != len(self.weights):
            raise InvalidDims("one weight matrix and bias vector per layer transition")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.dims[i + 1], self.dims[i]) or b.shape != (self.dims[i + 1],):
                raise InvalidDims(f"layer {i} parameter shapes do not match dims {self.dims}")

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "MlpModel":
        return MlpModel(self.dims, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def logits(self, x: np.ndarray) -> np.ndarray:
        h = _check_input(x, self.dims[0])
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if i < last:
                h = np.maximum(h, 0.0)
        return h


def _check_input(x, n_in: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != n_in or x.ndim not in (1, 2):
        raise DimensionMismatch(f"expected input of width {n_in}, got shape {x.shape}")
    return x


def init_mlp(dims: Sequence[int] = DEFAULT_DIMS, seed: int = 0) -> MlpModel:
    """He-normal weights (variance 2/fan_in) and zero biases."""
    dims = tuple(dims)
    if len(dims) != 4 or any(int(d) < 1 for d in dims):
        raise InvalidDims(f"dims must be four positive sizes, got {dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(dims, weights, biases)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward(m, x) -> np.ndarray:
    """Class probabilities for one input vector or a batch (rows).

    ``m`` is anything with a ``logits`` method, so quantized models work too.
    """
    return softmax(m.logits(x))


def loss_ce(probs, label) -> float | np.ndarray:
    """Cross-entropy -log(max(p_label, 1e-12)); vectorised over rows."""
    p = np.asarray(probs, dtype=np.float64)
    label = np.asarray(label)
    if p.ndim == 1:
        return float(-np.log(max(p[int(label)], LOSS_FLOOR)))
    picked = p[np.arange(p.shape[0]), label]
    return -np.log(np.maximum(picked, LOSS_FLOOR))


def predict_label(m, x) -> tuple[int, np.ndarray]:
    """(argmax class, probabilities); np.argmax already picks the lowest index on ties."""
    p = forward(m, x)
    if p.ndim != 1:
        raise DimensionMismatch("predict_label takes a single input vector")
    return int(np.argmax(p)), p


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])


def gradients(m: MlpModel, inputs, labels) -> Gradients:
    """Analytic gradients of the mean cross-entropy over the batch."""
    x = _check_input(inputs, m.dims[0])
    if x.ndim == 1:
        x = x[None, :]
    y = np.asarray(labels, dtype=np.intp).reshape(-1)
    if x.shape[0] == 0:
        raise EmptyDataset("empty batch")
    if y.shape[0] != x.shape[0]:
        raise DimensionMismatch("inputs and labels differ in length")
    if np.any((y < 0) | (y >= m.dims[-1])):
        raise GaitError("label out of range")

    acts = [x]
    pre = []
    h = x
    last = len(m.weights) - 1
    for i, (w, b) in enumerate(zip(m.weights, m.biases)):
        z = h @ w.T + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < last else z
        acts.append(h)

    delta = softmax(pre[-1])
    delta[np.arange(len(y)), y] -= 1.0
    delta /= len(y)

    gw = [None] * len(m.weights)
    gb = [None] * len(m.weights)
    for i in range(last, -1, -1):
        gw[i] = delta.T @ acts[i]
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ m.weights[i]) * (pre[i - 1] > 0)
    return Gradients(gw, gb)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 42
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise GaitError("epochs must be >= 1")
        if self.batch_size < 1:
            raise GaitError("batch_size must be >= 1")
        # zero is accepted: it freezes the parameters, which tests rely on
        if not self.learning_rate >= 0:
            raise GaitError("learning_rate must be non-negative")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.train_loss)

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])
            for i in range(len(self)):
                w.writerow(
                    [i + 1]
                    + [repr(float(v[i])) for v in (self.train_loss, self.train_acc, self.val_loss, self.val_acc)]
                )


def evaluate(m, x, y) -> tuple[float, float]:
    """(mean cross-entropy, accuracy) over a labelled set."""
    p = forward(m, x)
    y = np.asarray(y)
    return float(np.mean(loss_ce(p, y))), float(np.mean(np.argmax(p, axis=1) == y))


def train(
    m: MlpModel,
    train_set: tuple[np.ndarray, np.ndarray],
    val_set: tuple[np.ndarray, np.ndarray],
    cfg: TrainConfig = TrainConfig(),
) -> tuple[MlpModel, TrainHistory]:
    """Minibatch Adam on mean cross-entropy. Returns a trained copy of ``m``."""
    x_tr, y_tr = np.asarray(train_set[0], dtype=np.float64), np.asarray(train_set[1], dtype=np.intp)
    x_va, y_va = np.asarray(val_set[0], dtype=np.float64), np.asarray(val_set[1], dtype=np.intp)
    if len(x_tr) == 0 or len(x_va) == 0:
        raise EmptyDataset("training and validation sets must be non-empty")
    _check_input(x_tr, m.dims[0])
    _check_input(x_va, m.dims[0])

    model = m.copy()
    params = [p for pair in zip(model.weights, model.biases) for p in pair]
    mom = [np.zeros_like(p) for p in params]
    vel = [np.zeros_like(p) for p in params]
    rng = np.random.default_rng(cfg.seed)
    hist = TrainHistory()
    n = len(x_tr)
    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            g = gradients(model, x_tr[idx], y_tr[idx])
            grads = [a for pair in zip(g.weights, g.biases) for a in pair]
            step += 1
            c1 = 1.0 - cfg.beta1**step
            c2 = 1.0 - cfg.beta2**step
            for p, gp, mo, ve in zip(params, grads, mom, vel):
                mo *= cfg.beta1
                mo += (1.0 - cfg.beta1) * gp
                ve *= cfg.beta2
                ve += (1.0 - cfg.beta2) * gp * gp
                p -= cfg.learning_rate * (mo / c1) / (np.sqrt(ve / c2) + cfg.adam_eps)
        loss, acc = evaluate(model, x_tr, y_tr)
        hist.train_loss.append(loss)
        hist.train_acc.append(acc)
        loss, acc = evaluate(model, x_va, y_va)
        hist.val_loss.append(loss)
        hist.val_acc.append(acc)
    return model, hist
