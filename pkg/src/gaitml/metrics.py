"""Classifier evaluation: confusion matrix, precision/recall/F1, one-vs-rest AUC."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from gaitml.dataset import ActivityLabel
from gaitml.errors import EmptyInput, LengthMismatch

N_CLASSES = len(ActivityLabel)


def confusion_matrix(preds, labels, n_classes: int = N_CLASSES) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    p = np.asarray(preds, dtype=np.intp).ravel()
    y = np.asarray(labels, dtype=np.intp).ravel()
    if p.shape != y.shape:
        raise LengthMismatch(f"{p.size} predictions vs {y.size} labels")
    if p.size == 0:
        raise EmptyInput("no predictions to evaluate")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y, p), 1)
    return cm


def accuracy(cm: np.ndarray) -> float:
    return float(np.trace(cm) / cm.sum())


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    undefined = den == 0
    out = np.divide(num, den, out=np.zeros(num.shape, dtype=np.float64), where=~undefined)
    return out, undefined


@dataclass(frozen=True)
class ClassScores:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    # True where the value came from a 0/0 and was set to 0
    precision_undefined: np.ndarray
    recall_undefined: np.ndarray
    f1_undefined: np.ndarray


def prf1(cm: np.ndarray) -> ClassScores:
    cm = np.asarray(cm)
    tp = np.diag(cm).astype(np.float64)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    precision, p_undef = _safe_ratio(tp, tp + fp)
    recall, r_undef = _safe_ratio(tp, tp + fn)
    f1, f_undef = _safe_ratio(2 * precision * recall, precision + recall)
    return ClassScores(precision, recall, f1, p_undef, r_undef, f_undef)


def _average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their mean rank."""
    _, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    upper = np.cumsum(counts)
    mean_rank = upper - (counts - 1) / 2.0
    return mean_rank[inverse]


def binary_auc(scores, positive) -> float:
    """Mann-Whitney AUC; NaN when either class is absent."""
    s = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(positive, dtype=bool)
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return math.nan
    ranks = _average_ranks(s)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class AucResult:
    per_class: np.ndarray  # NaN where undefined
    defined: np.ndarray
    macro: float  # mean over defined classes, NaN if none


def roc_auc_ovr(scores, labels, n_classes: int = N_CLASSES) -> AucResult:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.intp)
    if s.ndim != 2 or s.shape[0] != y.shape[0]:
        raise LengthMismatch("scores must be (n, n_classes) with one label per row")
    per = np.array([binary_auc(s[:, c], y == c) for c in range(n_classes)])
    defined = ~np.isnan(per)
    macro = float(per[defined].mean()) if defined.any() else math.nan
    return AucResult(per, defined, macro)


def _json_num(v: float):
    return None if math.isnan(v) else float(v)


@dataclass(frozen=True)
class EvalReport:
    confusion: np.ndarray
    scores: ClassScores
    auc: AucResult
    mean_loss: float
    label_names: tuple[str, ...]

    @property
    def accuracy(self) -> float:
        return accuracy(self.confusion)

    @property
    def n(self) -> int:
        return int(self.confusion.sum())

    def to_dict(self) -> dict:
        per_class = {}
        for i, name in enumerate(self.label_names):
            per_class[name] = {
                "precision": float(self.scores.precision[i]),
                "recall": float(self.scores.recall[i]),
                "f1": float(self.scores.f1[i]),
                "auc": _json_num(self.auc.per_class[i]),
            }
        return {
            "accuracy": self.accuracy,
            "macro_auc": _json_num(self.auc.macro),
            "mean_loss": float(self.mean_loss),
            "n_windows": self.n,
            "labels": list(self.label_names),
            "per_class": per_class,
            "confusion": self.confusion.tolist(),
        }

    def format_text(self) -> str:
        """Plain-text summary: per-class rates to one decimal, accuracy to two."""
        cm = self.confusion
        width = max(len(n) for n in self.label_names)
        lines = [f"Accuracy: {100 * self.accuracy:.2f}%  (n={self.n}, loss={self.mean_loss:.4f})"]
        header = " " * (width + 2) + "".join(f"{n[:12]:>14}" for n in self.label_names) + f"{'F1':>8}{'AUC':>8}"
        lines.append(header)
        for i, name in enumerate(self.label_names):
            support = cm[i].sum()
            row = cm[i] / support * 100 if support else np.zeros(len(cm))
            auc = self.auc.per_class[i]
            lines.append(
                f"{name:<{width}}  "
                + "".join(f"{v:>13.1f}%" for v in row)
                + f"{self.scores.f1[i]:>8.2f}"
                + (f"{auc:>8.2f}" if not math.isnan(auc) else f"{'n/a':>8}")
            )
        return "\n".join(lines)


def evaluate_predictions(probs, labels, mean_loss: float, label_names=None) -> EvalReport:
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.intp)
    names = tuple(label_names or ActivityLabel.display_names())
    cm = confusion_matrix(np.argmax(p, axis=1), y, len(names))
    return EvalReport(cm, prf1(cm), roc_auc_ovr(p, y, len(names)), mean_loss, names)
