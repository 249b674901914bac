import dataclasses
import math

import numpy as np
import pytest

from t2dm_risk.cohort import DEFAULT_SCHEMA
from t2dm_risk.errors import ConfigError
from t2dm_risk.synthgen import (
    DEV_PROFILE, TEST_PROFILE, GenConfig, default_scenario, generate_cohort, sample_features,
)

NAMES = DEFAULT_SCHEMA.names


def test_default_scenario_sizes():
    dev, test = default_scenario(0)
    d, t = generate_cohort(dev), generate_cohort(test)
    assert len(d) == 2043 and d.labels.sum() == 1107
    assert len(t) == 395 and t.labels.sum() == 140
    assert t.labels.mean() == pytest.approx(0.354, abs=1e-3)
    assert not set(d.ids) & set(t.ids)


def test_published_profile_values():
    assert DEV_PROFILE["age"] == (46.59, 14.80)
    assert DEV_PROFILE["systolic_bp"] == (118.37, 18.92)
    assert TEST_PROFILE["age"] == (37.59, 11.45)


def test_clean_development_draw_within_three_se():
    dev, _ = default_scenario(1)
    cfg = dataclasses.replace(dev, missing_rate=0.0, outlier_rate=0.0)
    X, _ = sample_features(cfg)
    for name, (mean, sd) in DEV_PROFILE.items():
        col = X[:, NAMES.index(name)]
        assert abs(col.mean() - mean) < 3 * sd / math.sqrt(cfg.n), name


def test_marginals_converge_at_large_n():
    dev, _ = default_scenario(2)
    cfg = dataclasses.replace(dev, n=100_000, missing_rate=0.0, outlier_rate=0.0, exact_prevalence=False)
    X, y = sample_features(cfg)
    for name, (mean, sd) in DEV_PROFILE.items():
        col = X[:, NAMES.index(name)]
        assert abs(col.mean() - mean) < 0.01 * abs(mean), name
        assert abs(col.std() - sd) < 0.01 * sd, name
    assert abs(X[:, NAMES.index("sex")].mean() - cfg.male_fraction) < 0.01
    assert abs(y.mean() - cfg.prevalence) < 3 * math.sqrt(cfg.prevalence * (1 - cfg.prevalence) / cfg.n)


def test_effects_shift_class_means():
    dev, _ = default_scenario(3)
    cfg = dataclasses.replace(dev, n=50_000, missing_rate=0.0, outlier_rate=0.0)
    X, y = sample_features(cfg)
    j = NAMES.index("bmi")
    sd = DEV_PROFILE["bmi"][1]
    gap = (X[y == 1, j].mean() - X[y == 0, j].mean()) / sd
    assert gap == pytest.approx(cfg.effects["bmi"], abs=0.03)


def test_missing_and_outlier_rates():
    dev, _ = default_scenario(4)
    cfg = dataclasses.replace(dev, n=20_000, missing_rate=0.05, outlier_rate=0.03)
    X, _ = sample_features(cfg)
    clean, _ = sample_features(dataclasses.replace(cfg, outlier_rate=0.0))
    cells = X.size
    miss = np.isnan(X).mean()
    assert abs(miss - 0.05) < 3 * math.sqrt(0.05 * 0.95 / cells)
    # outlier draws consume the same stream regardless of rate, so diffs mark corrupted cells
    cont = [i for i, f in enumerate(DEFAULT_SCHEMA.features) if f.kind == "continuous"]
    both = ~np.isnan(X[:, cont]) & ~np.isnan(clean[:, cont])
    changed = (X[:, cont] != clean[:, cont])[both].mean()
    assert abs(changed - 0.03) < 3 * math.sqrt(0.03 * 0.97 / both.sum())
    ratio = (X[:, cont] / clean[:, cont])[both & (X[:, cont] != clean[:, cont])]
    assert np.all(((ratio >= 2) & (ratio <= 4)) | ((ratio >= 0.25) & (ratio <= 0.5)))


def test_generation_is_deterministic():
    dev, _ = default_scenario(5)
    a, b = generate_cohort(dev), generate_cohort(dev)
    assert a.rows == b.rows
    assert generate_cohort(default_scenario(6)[0]).rows != a.rows


def test_null_scenario_has_no_effects():
    dev, test = default_scenario(0, null=True)
    assert dev.effects == {} and test.effects == {}


def test_config_validation_and_round_trip():
    dev, _ = default_scenario(0)
    assert GenConfig.from_dict(dev.to_dict()) == dev
    with pytest.raises(ConfigError):
        dataclasses.replace(dev, prevalence=1.0)
    with pytest.raises(ConfigError):
        dataclasses.replace(dev, missing_rate=0.5)
    with pytest.raises(ConfigError):
        dataclasses.replace(dev, features={"age": (40.0, 0.0)})
