from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata


class AUCUndefinedWarning(UserWarning):
    """AUC requested for labels containing a single class."""


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float | None
    n: int = 0
    positive_rate: float = 0.0
    predicted_positive_rate: float = 0.0

    @property
    def all_long(self) -> bool:
        """Every prediction was class 1 (recall 1, precision = positive rate)."""
        return self.n > 0 and self.predicted_positive_rate == 1.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Metrics":
        return cls(**d)


def confusion(pred: np.ndarray, labels: np.ndarray) -> tuple[int, int, int, int]:
    """(tp, fp, tn, fn)"""
    pred = np.asarray(pred).astype(bool)
    lab = np.asarray(labels).astype(bool)
    return (
        int(np.sum(pred & lab)),
        int(np.sum(pred & ~lab)),
        int(np.sum(~pred & ~lab)),
        int(np.sum(~pred & lab)),
    )


def roc_auc(scores, labels) -> float:
    """Mann-Whitney statistic with mid-ranks for ties.

    Equals the trapezoidal area under the ROC curve.
    """
    s = np.asarray(scores, dtype=float)
    lab = np.asarray(labels).astype(bool)
    n_pos, n_neg = int(lab.sum()), int((~lab).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes")
    ranks = rankdata(s)
    return float((ranks[lab].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def roc_curve(scores, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """ROC operating points for the rule ``score >= threshold``.

    Thresholds run from ``+inf`` (nothing predicted positive) down through every
    distinct score.
    """
    s = np.asarray(scores, dtype=float)
    lab = np.asarray(labels).astype(bool)
    n_pos, n_neg = int(lab.sum()), int((~lab).sum())
    order = np.argsort(-s, kind="stable")
    s_sorted, l_sorted = s[order], lab[order]
    distinct = np.flatnonzero(np.diff(s_sorted)) if s.size else np.array([], dtype=int)
    ends = np.concatenate((distinct, [s.size - 1])) if s.size else np.array([], dtype=int)
    tps = np.cumsum(l_sorted)[ends]
    fps = np.cumsum(~l_sorted)[ends]
    tpr = np.concatenate(([0.0], tps / n_pos if n_pos else np.zeros_like(tps, dtype=float)))
    fpr = np.concatenate(([0.0], fps / n_neg if n_neg else np.zeros_like(fps, dtype=float)))
    thresholds = np.concatenate(([np.inf], s_sorted[ends]))
    return fpr, tpr, thresholds


def auc_trapezoid(scores, labels) -> float:
    fpr, tpr, _ = roc_curve(scores, labels)
    return float(np.trapezoid(tpr, fpr)) if hasattr(np, "trapezoid") else float(np.trapz(tpr, fpr))


def evaluate(probs, labels, threshold: float = 0.5) -> Metrics:
    """Confusion-matrix metrics at ``threshold`` plus rank AUC.

    With single-class labels the AUC is ``None`` and an
    :class:`AUCUndefinedWarning` is issued.
    """
    p = np.asarray(probs, dtype=float)
    lab = np.asarray(labels).astype(int)
    if p.shape != lab.shape:
        raise ValueError(f"probs {p.shape} and labels {lab.shape} differ in shape")
    if p.size == 0:
        raise ValueError("nothing to evaluate")
    pred = p >= threshold
    tp, fp, tn, fn = confusion(pred, lab)
    n = p.size
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    if 0 < lab.sum() < n:
        auc = roc_auc(p, lab)
    else:
        warnings.warn("AUC is undefined for single-class labels", AUCUndefinedWarning, stacklevel=2)
        auc = None
    return Metrics(
        accuracy=(tp + tn) / n,
        precision=precision,
        recall=recall,
        f1=f1,
        auc=auc,
        n=n,
        positive_rate=float(lab.mean()),
        predicted_positive_rate=float(pred.mean()),
    )


def mean_metrics(items: list[Metrics]) -> Metrics:
    """Unweighted average over folds; AUC averages the folds that define it."""
    if not items:
        raise ValueError("no metrics to average")
    aucs = [m.auc for m in items if m.auc is not None]
    return Metrics(
        accuracy=float(np.mean([m.accuracy for m in items])),
        precision=float(np.mean([m.precision for m in items])),
        recall=float(np.mean([m.recall for m in items])),
        f1=float(np.mean([m.f1 for m in items])),
        auc=float(np.mean(aucs)) if aucs else None,
        n=int(sum(m.n for m in items)),
        positive_rate=float(sum(m.positive_rate * m.n for m in items) / max(1, sum(m.n for m in items))),
        predicted_positive_rate=float(sum(m.predicted_positive_rate * m.n for m in items) / max(1, sum(m.n for m in items))),
    )
