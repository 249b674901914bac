"""Paired model comparison: DeLong test, NRI, category-free NRI and IDI."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm, rankdata

from . import metrics
from .errors import DegenerateVarianceError, DimensionError, UndefinedMetricError
from .resample import BootstrapSpec, bootstrap_statistic

VAR_FLOOR = 1e-15


def _paired(a, b, labels):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    y = np.asarray(labels).ravel().astype(np.int64)
    if not (a.shape == b.shape == y.shape):
        raise DimensionError("score vectors and labels must have equal length")
    return a, b, y


def _events(y):
    ev = y == 1
    if ev.all() or not ev.any():
        raise UndefinedMetricError("need both events and nonevents")
    return ev


def structural_components(probs, labels):
    """DeLong placements.

    ``v10[i]`` is the mean tie-credited win rate of positive ``i`` over all
    negatives; ``v01[j]`` that of all positives over negative ``j``.
    """
    p = np.asarray(probs, dtype=float)
    y = np.asarray(labels).astype(np.int64)
    pos, neg = p[y == 1], p[y == 0]
    m, n = pos.size, neg.size
    r_all = rankdata(p)
    v10 = (r_all[y == 1] - rankdata(pos)) / n
    v01 = 1.0 - (r_all[y == 0] - rankdata(neg)) / m
    return v10, v01


@dataclass(frozen=True)
class DeLongResult:
    theta_a: float
    theta_b: float
    z: float
    p: float
    variance: float


def delong_test(probs_a, probs_b, labels) -> DeLongResult:
    """Two-sided test of ``AUROC(a) == AUROC(b)`` on the same rows; ``z > 0`` when a is better."""
    a, b, y = _paired(probs_a, probs_b, labels)
    _events(y)
    m = int(y.sum())
    n = y.size - m
    theta_a, theta_b = metrics.auroc(a, y), metrics.auroc(b, y)
    v10a, v01a = structural_components(a, y)
    v10b, v01b = structural_components(b, y)
    s10 = np.cov(np.vstack([v10a, v10b])) if m > 1 else np.zeros((2, 2))
    s01 = np.cov(np.vstack([v01a, v01b])) if n > 1 else np.zeros((2, 2))
    var = (s10[0, 0] + s10[1, 1] - 2 * s10[0, 1]) / m + (s01[0, 0] + s01[1, 1] - 2 * s01[0, 1]) / n
    var = float(max(var, 0.0))
    if var <= VAR_FLOOR:
        if theta_a == theta_b:
            return DeLongResult(theta_a, theta_b, 0.0, 1.0, var)
        raise DegenerateVarianceError(
            f"AUROCs differ ({theta_a:.6g} vs {theta_b:.6g}) but the DeLong variance is {var:.3g}")
    z = (theta_a - theta_b) / np.sqrt(var)
    return DeLongResult(theta_a, theta_b, float(z), float(2 * norm.sf(abs(z))), var)


def _categories(p, cutpoints):
    # right-open intervals, the last one closed
    return np.searchsorted(np.asarray(cutpoints), p, side="right")


@dataclass(frozen=True)
class NriComponents:
    events_up: int
    events_down: int
    nonevents_up: int
    nonevents_down: int
    n_events: int
    n_nonevents: int

    @property
    def event_part(self) -> float:
        return (self.events_up - self.events_down) / self.n_events

    @property
    def nonevent_part(self) -> float:
        return (self.nonevents_down - self.nonevents_up) / self.n_nonevents

    @property
    def nri(self) -> float:
        return self.event_part + self.nonevent_part


def _nri_components(up, down, ev) -> NriComponents:
    return NriComponents(
        events_up=int(np.sum(up & ev)), events_down=int(np.sum(down & ev)),
        nonevents_up=int(np.sum(up & ~ev)), nonevents_down=int(np.sum(down & ~ev)),
        n_events=int(ev.sum()), n_nonevents=int((~ev).sum()),
    )


def _check_cutpoints(cutpoints):
    c = np.asarray(cutpoints, dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise ValueError("need at least one cutpoint")
    if np.any(np.diff(c) <= 0) or c[0] <= 0 or c[-1] >= 1:
        raise ValueError(f"cutpoints must be strictly ascending inside (0, 1): {c.tolist()}")
    return c


def nri_categorical(probs_old, probs_new, labels, cutpoints: Sequence[float]):
    """Returns ``(nri, components)`` for movements across risk categories."""
    old, new, y = _paired(probs_old, probs_new, labels)
    ev = _events(y)
    c = _check_cutpoints(cutpoints)
    co, cn = _categories(old, c), _categories(new, c)
    comp = _nri_components(cn > co, cn < co, ev)
    return comp.nri, comp


def nri_continuous(probs_old, probs_new, labels) -> float:
    old, new, y = _paired(probs_old, probs_new, labels)
    ev = _events(y)
    return _nri_components(new > old, new < old, ev).nri


def idi(probs_old, probs_new, labels) -> float:
    old, new, y = _paired(probs_old, probs_new, labels)
    ev = _events(y)
    d = new - old
    return float(d[ev].mean() - d[~ev].mean())


def default_cutpoints(probs_base, quantiles=(0.2, 0.8)) -> list[float]:
    """Risk-group thresholds of the baseline scores, deduplicated, kept inside (0, 1)."""
    qs = np.quantile(np.asarray(probs_base, dtype=float), quantiles)
    return [float(q) for q in np.unique(qs) if 0.0 < q < 1.0]


def _statistic_fn(statistic: str, cutpoints):
    if statistic == "nri":
        return lambda o, n, y: nri_categorical(o, n, y, cutpoints)[0]
    if statistic == "cnri":
        return nri_continuous
    if statistic == "idi":
        return idi
    raise ValueError(f"unknown statistic {statistic!r}")


def reclass_p_value(statistic: str, probs_old, probs_new, labels, spec: BootstrapSpec,
                    cutpoints: Optional[Sequence[float]] = None) -> float:
    """Two-sided bootstrap-normal p-value: ``z = point / sd(bootstrap)``.

    ``cutpoints`` only matter for ``"nri"`` and default to the 20%/80%
    quantiles of ``probs_old`` on the full sample.
    """
    old, new, y = _paired(probs_old, probs_new, labels)
    if statistic == "nri" and cutpoints is None:
        cutpoints = default_cutpoints(old)
    fn = _statistic_fn(statistic, cutpoints)
    point = fn(old, new, y)
    boot = bootstrap_statistic(y, lambda idx: fn(old[idx], new[idx], y[idx]), spec)
    sd = float(np.std(boot, ddof=1)) if boot.size > 1 else 0.0
    if sd == 0.0:
        if point == 0.0:
            return 1.0
        raise DegenerateVarianceError(f"{statistic} = {point:.6g} with zero bootstrap spread")
    return float(2 * norm.sf(abs(point) / sd))


@dataclass(frozen=True)
class ComparisonReport:
    auroc_base: float
    auroc_new: float
    delong_z: float
    delong_p: float
    nri: float
    nri_p: float
    cnri: float
    cnri_p: float
    idi: float
    idi_p: float

    def to_dict(self) -> dict:
        return asdict(self)


def compare_models(probs_base, probs_new, labels, spec: BootstrapSpec,
                   cutpoints: Optional[Sequence[float]] = None) -> ComparisonReport:
    """Full comparison of a candidate model against a baseline on the same rows."""
    base, new, y = _paired(probs_base, probs_new, labels)
    if cutpoints is None:
        cutpoints = default_cutpoints(base)
    dl = delong_test(new, base, y)
    nri, _ = nri_categorical(base, new, y, cutpoints)
    return ComparisonReport(
        auroc_base=dl.theta_b,
        auroc_new=dl.theta_a,
        delong_z=dl.z,
        delong_p=dl.p,
        nri=nri,
        nri_p=reclass_p_value("nri", base, new, y, spec, cutpoints),
        cnri=nri_continuous(base, new, y),
        cnri_p=reclass_p_value("cnri", base, new, y, spec),
        idi=idi(base, new, y),
        idi_p=reclass_p_value("idi", base, new, y, spec),
    )
