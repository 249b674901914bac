import numpy as np
import pytest
from scipy.integrate import trapezoid
from hypothesis import given, settings, strategies as st

from t2dm_risk import metrics
from t2dm_risk.errors import UndefinedMetricError
from t2dm_risk.rng import Xoshiro256

from oracles import auroc_pairs, average_precision_sweep, youden_scan

P4 = [0.1, 0.4, 0.35, 0.8]
Y4 = [0, 0, 1, 1]


def test_auroc_examples():
    assert metrics.auroc(P4, Y4) == auroc_pairs(P4, Y4) == 0.75
    assert metrics.auroc([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5
    assert metrics.auroc([0.1, 0.2, 0.7, 0.9], [0, 0, 1, 1]) == 1.0
    with pytest.raises(UndefinedMetricError):
        metrics.auroc([0.1, 0.2], [1, 1])


def random_predset(rng, n):
    # coarse grid so ties are common
    p = rng.integers(20, n) / 20.0
    y = rng.integers(2, n)
    y[0], y[1] = 0, 1
    return p, y


def test_auroc_matches_pair_oracle_with_ties():
    rng = Xoshiro256(2024)
    sizes = rng.integers(199, 200) + 2  # 200 instances, n in [2, 200]
    for n in sizes:
        p, y = random_predset(rng, int(n))
        assert abs(metrics.auroc(p, y) - auroc_pairs(p, y)) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 120))
def test_auroc_transform_invariance(seed, n):
    rs = np.random.default_rng(seed)
    p = rs.integers(0, 15, n) / 15.0
    y = rs.integers(0, 2, n)
    y[0], y[1] = 0, 1
    a = metrics.auroc(p, y)
    assert metrics.auroc(np.exp(3 * p) - 7, y) == a
    assert metrics.auroc(1 - p, y) == pytest.approx(1 - a, abs=1e-12)


def test_auprc_examples():
    assert metrics.auprc([0.9, 0.1], [1, 0]) == 1.0
    assert metrics.auprc(P4, Y4) == pytest.approx(5 / 6, abs=1e-15)
    assert metrics.auprc([0.9, 0.1], [0, 1]) == 0.5
    with pytest.raises(UndefinedMetricError):
        metrics.auprc([0.2, 0.3], [0, 0])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 80))
def test_auprc_matches_threshold_sweep(seed, n):
    rs = np.random.default_rng(seed)
    p = rs.integers(0, 10, n) / 10.0
    y = rs.integers(0, 2, n)
    y[0] = 1
    assert metrics.auprc(p, y) == pytest.approx(average_precision_sweep(p, y), abs=1e-12)


def test_confusion_examples():
    perfect = metrics.confusion_at_threshold([0.9, 0.8, 0.1], [1, 1, 0], 0.5)
    assert all(v == 1.0 for v in vars(perfect).values())
    half = metrics.confusion_at_threshold([0.6, 0.4], [1, 1], 0.5)
    assert half.sensitivity == 0.5 and half.specificity is None
    cm = metrics.confusion_at_threshold(P4, Y4, 0.35)
    assert (cm.sensitivity, cm.specificity) == (1.0, 0.5)
    assert cm.ppv == pytest.approx(2 / 3, abs=1e-15)


def test_confusion_extreme_thresholds():
    rs = np.random.default_rng(0)
    p, y = rs.uniform(size=50), rs.integers(0, 2, 50)
    assert metrics.confusion_at_threshold(p, y, -np.inf).sensitivity == 1.0
    assert metrics.confusion_at_threshold(p, y, np.inf).specificity == 1.0


def test_youden_examples():
    assert metrics.youden_threshold(P4, Y4) == 0.35
    assert metrics.youden_threshold([0.1, 0.2, 0.7, 0.9], [0, 0, 1, 1]) == 0.7
    assert metrics.youden_threshold([0.4] * 4, [0, 1, 0, 1]) == 0.4


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 60))
def test_youden_matches_scan(seed, n):
    rs = np.random.default_rng(seed)
    p = rs.integers(0, 12, n) / 12.0
    y = rs.integers(0, 2, n)
    y[0], y[1] = 0, 1
    assert metrics.youden_threshold(p, y) == youden_scan(p, y)[0]


def test_brier_examples():
    assert metrics.brier([1, 0, 1], [1, 0, 1]) == 0.0
    assert metrics.brier([0.5] * 4, [1, 0, 0, 1]) == 0.25
    assert metrics.brier([0.8, 0.3], [1, 0]) == pytest.approx(0.065, abs=1e-15)


def test_brier_minimized_at_prevalence():
    y = np.array([1] * 3 + [0] * 7)
    grid = np.linspace(0, 1, 101)
    scores = [metrics.brier(np.full(10, c), y) for c in grid]
    assert grid[int(np.argmin(scores))] == pytest.approx(0.3)


def test_roc_curve_shape():
    rs = np.random.default_rng(1)
    p, y = rs.integers(0, 10, 100) / 10.0, rs.integers(0, 2, 100)
    c = metrics.roc_curve(p, y)
    assert (c.fpr[0], c.tpr[0]) == (0.0, 0.0) and (c.fpr[-1], c.tpr[-1]) == (1.0, 1.0)
    assert np.all(np.diff(c.fpr) >= 0) and np.all(np.diff(c.tpr) >= 0)
    assert trapezoid(c.tpr, c.fpr) == pytest.approx(metrics.auroc(p, y), abs=1e-12)


def test_calibration_single_bin():
    c = metrics.calibration_bins([0.31, 0.33, 0.35, 0.37], [1, 0, 1, 0])
    assert len(c.bins) == 1
    assert c.frac_pos[0] == 0.5 and c.mean_pred[0] == pytest.approx(0.34)


def test_calibration_two_bins():
    c = metrics.calibration_bins([0.1, 0.9], [0, 1], n_bins=2)
    assert c.bins == [(0.1, 0.0, 1), (0.9, 1.0, 1)]


def test_calibration_last_bin_is_closed():
    c = metrics.calibration_bins([1.0, 0.95], [1, 1])
    assert c.counts.tolist() == [2]


def test_calibration_monte_carlo():
    rng = Xoshiro256(77)
    p = rng.random(100_000)
    y = (rng.random(100_000) < p).astype(int)
    c = metrics.calibration_bins(p, y)
    assert c.counts.sum() == 100_000
    big = c.counts >= 1000
    assert np.max(np.abs(c.frac_pos[big] - c.mean_pred[big])) < 0.02
    lo, hi = c.edges[:-1], c.edges[1:]
    assert np.all((c.mean_pred >= lo) & (c.mean_pred <= hi))
