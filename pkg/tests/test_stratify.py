import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from t2dm_risk.errors import StratificationError
from t2dm_risk.stratify import assign_risk_groups, group_ppv

from oracles import quantile_linear


def test_ten_value_example():
    s = np.arange(10) / 10.0
    g = assign_risk_groups(s)
    assert g.t_low == pytest.approx(quantile_linear(s, 0.2))
    assert g.t_high == pytest.approx(quantile_linear(s, 0.8))
    assert s[g.assignment == "Low"].tolist() == [0.0, 0.1]
    assert s[g.assignment == "High"].tolist() == [0.8, 0.9]
    assert g.counts() == {"Low": 2, "Medium": 6, "High": 2}


def test_all_equal_scores_are_high():
    g = assign_risk_groups([0.3] * 8)
    assert g.t_low == g.t_high == 0.3
    assert g.counts() == {"Low": 0, "Medium": 0, "High": 8}


def test_five_distinct_scores():
    g = assign_risk_groups([0.5, 0.1, 0.9, 0.3, 0.7])
    assert g.counts() == {"Low": 1, "Medium": 3, "High": 1}


def test_too_few_scores():
    with pytest.raises(StratificationError):
        assign_risk_groups([0.1, 0.2, 0.3, 0.4])


def test_group_ppv_examples():
    s = [0.1, 0.2, 0.4, 0.5, 0.6, 0.7, 0.75, 0.8, 0.9, 0.95]
    y = [0, 0, 1, 0, 1, 0, 1, 0, 1, 1]
    stats = group_ppv(assign_risk_groups(s), y)
    assert stats["High"].count == 2 and stats["High"].ppv == 1.0
    assert stats["Low"].positives == 0 and stats["Low"].ppv == 0.0
    assert sum(v.count for v in stats.values()) == 10
    empty = group_ppv(assign_risk_groups([0.3] * 5), [0, 1, 0, 1, 0])
    assert empty["Low"].ppv is None and empty["Low"].count == 0


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), st.integers(5, 500))
def test_distinct_scores_give_twenty_sixty_twenty(seed, n):
    s = np.random.default_rng(seed).permutation(n) / n
    c = assign_risk_groups(s).counts()
    assert sum(c.values()) == n
    assert abs(c["Low"] - 0.2 * n) <= 1 and abs(c["High"] - 0.2 * n) <= 1


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.integers(5, 200))
def test_monotone_transform_invariance(seed, n):
    s = np.random.default_rng(seed).integers(0, 20, n) / 20.0
    a = assign_risk_groups(s).assignment
    b = assign_risk_groups(np.exp(2 * s) + 1).assignment
    assert np.array_equal(a, b)
