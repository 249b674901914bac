"""Discrimination and calibration metrics for binary risk scores.

A case is called positive when ``prob >= threshold``. Ratios whose
denominator is zero are reported as ``None`` (undefined), never as 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .errors import DimensionError, UndefinedMetricError


def _check(probs, labels):
    p = np.asarray(probs, dtype=float).ravel()
    y = np.asarray(labels).ravel().astype(np.int64)
    if p.shape != y.shape:
        raise DimensionError(f"{p.size} scores for {y.size} labels")
    return p, y


def auroc(probs, labels) -> float:
    """Mann-Whitney AUROC with ties credited 0.5, via midranks."""
    p, y = _check(probs, labels)
    m = int(y.sum())
    n = y.size - m
    if m == 0 or n == 0:
        raise UndefinedMetricError("AUROC needs both classes")
    ranks = rankdata(p)
    return float((ranks[y == 1].sum() - m * (m + 1) / 2.0) / (m * n))


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auroc: float

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist(), self.thresholds.tolist()))


def _cumulative_counts(p, y):
    order = np.argsort(-p, kind="mergesort")
    ps, ys = p[order], y[order]
    # last index of each run of equal scores in descending order
    last = np.r_[np.nonzero(np.diff(ps))[0], ps.size - 1]
    tp = np.cumsum(ys)[last]
    fp = (last + 1) - tp
    return ps[last], tp.astype(float), fp.astype(float)


def roc_curve(probs, labels) -> RocCurve:
    p, y = _check(probs, labels)
    m = int(y.sum())
    n = y.size - m
    if m == 0 or n == 0:
        raise UndefinedMetricError("ROC needs both classes")
    thr, tp, fp = _cumulative_counts(p, y)
    return RocCurve(
        fpr=np.r_[0.0, fp / n],
        tpr=np.r_[0.0, tp / m],
        thresholds=np.r_[np.inf, thr],
        auroc=auroc(p, y),
    )


@dataclass(frozen=True)
class PrCurve:
    recall: np.ndarray
    precision: np.ndarray
    thresholds: np.ndarray
    average_precision: float


def pr_curve(probs, labels) -> PrCurve:
    p, y = _check(probs, labels)
    m = int(y.sum())
    if m == 0:
        raise UndefinedMetricError("precision-recall needs at least one positive")
    thr, tp, fp = _cumulative_counts(p, y)
    recall = tp / m
    precision = tp / (tp + fp)
    ap = float(np.sum(np.diff(np.r_[0.0, recall]) * precision))
    return PrCurve(recall, precision, thr, ap)


def auprc(probs, labels) -> float:
    """Step-wise average precision over descending unique thresholds."""
    return pr_curve(probs, labels).average_precision


@dataclass(frozen=True)
class ThresholdMetrics:
    sensitivity: Optional[float]
    specificity: Optional[float]
    ppv: Optional[float]
    npv: Optional[float]
    f1: Optional[float]
    accuracy: Optional[float]


def _ratio(a, b):
    return None if b == 0 else a / b


def confusion_at_threshold(probs, labels, t: float) -> ThresholdMetrics:
    p, y = _check(probs, labels)
    pred = p >= t
    pos = y == 1
    tp = float(np.sum(pred & pos))
    fp = float(np.sum(pred & ~pos))
    fn = float(np.sum(~pred & pos))
    tn = float(np.sum(~pred & ~pos))
    return ThresholdMetrics(
        sensitivity=_ratio(tp, tp + fn),
        specificity=_ratio(tn, tn + fp),
        ppv=_ratio(tp, tp + fp),
        npv=_ratio(tn, tn + fn),
        f1=_ratio(2 * tp, 2 * tp + fp + fn),
        accuracy=_ratio(tp + tn, p.size),
    )


def youden_threshold(probs, labels) -> float:
    """Threshold maximizing sensitivity + specificity - 1; ties go to the smallest threshold."""
    p, y = _check(probs, labels)
    m = int(y.sum())
    n = y.size - m
    if m == 0 or n == 0:
        raise UndefinedMetricError("Youden's J needs both classes")
    thr, tp, fp = _cumulative_counts(p, y)
    # thr is descending; +inf gives J = 0 and only wins when nothing beats it
    j = tp / m - fp / n
    cands = np.r_[thr, np.inf]
    js = np.r_[j, 0.0]
    best = js.max()
    return float(cands[js >= best - 1e-12].min())


def brier(probs, labels) -> float:
    p, y = _check(probs, labels)
    if p.size == 0:
        raise UndefinedMetricError("Brier score of an empty set")
    return float(np.mean((p - y) ** 2))


@dataclass(frozen=True)
class CalibrationCurve:
    mean_pred: np.ndarray
    frac_pos: np.ndarray
    counts: np.ndarray
    edges: np.ndarray
    brier: float

    @property
    def bins(self):
        return list(zip(self.mean_pred.tolist(), self.frac_pos.tolist(), self.counts.tolist()))


def calibration_bins(probs, labels, n_bins: int = 10) -> CalibrationCurve:
    """Equal-width reliability bins on [0, 1]; empty bins are left out."""
    p, y = _check(probs, labels)
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    idx = np.minimum((p * n_bins).astype(np.int64), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    sums = np.bincount(idx, weights=p, minlength=n_bins)
    pos = np.bincount(idx, weights=y.astype(float), minlength=n_bins)
    keep = counts > 0
    return CalibrationCurve(
        mean_pred=sums[keep] / counts[keep],
        frac_pos=pos[keep] / counts[keep],
        counts=counts[keep],
        edges=np.linspace(0.0, 1.0, n_bins + 1),
        brier=brier(p, y),
    )
