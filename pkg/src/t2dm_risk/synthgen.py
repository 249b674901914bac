"""Synthetic cohorts with the marginal profile of the study population.

Each continuous feature is an independent Gaussian whose class-conditional
mean is shifted by ``(label - prevalence) * effect * sd`` and whose
within-class SD is shrunk to ``sd * sqrt(1 - prevalence * (1 - prevalence) * effect**2)``.
With that centring the pooled mean and SD equal the configured values
exactly in expectation, for any effect size. Sex is Bernoulli with the
male fraction shifted the same way in Bernoulli-SD units.

After sampling, each value goes missing with probability ``missing_rate``
and each present continuous value becomes a multiplicative outlier with
probability ``outlier_rate`` (multiplied or divided by a factor drawn
uniformly from [2, 4]).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .cohort import CATEGORICAL, DEFAULT_SCHEMA, Cohort, FeatureSchema, cohort_from_arrays
from .errors import ConfigError
from .rng import Xoshiro256, derive_seed

# (mean, sd) per continuous feature and the male fraction, development / longitudinal cohorts
DEV_PROFILE = {
    "age": (46.59, 14.80),
    "bmi": (27.86, 6.71),
    "waist_cm": (88.22, 16.04),
    "systolic_bp": (118.37, 18.92),
    "diastolic_bp": (65.64, 10.00),
    "qrs_duration": (94.17, 12.49),
    "qt_interval": (389.30, 27.22),
    "qt_corrected": (403.14, 20.25),
    "pr_interval": (163.29, 23.09),
    "avg_rr_interval": (899.17, 138.42),
    "t_axis": (38.01, 25.98),
}
DEV_MALE_FRACTION = 1396 / 2043

TEST_PROFILE = {
    "age": (37.59, 11.45),
    "bmi": (28.84, 5.83),
    "waist_cm": (88.67, 14.79),
    "systolic_bp": (112.22, 13.40),
    "diastolic_bp": (66.32, 10.62),
    "qrs_duration": (94.51, 10.57),
    "qt_interval": (390.59, 26.13),
    "qt_corrected": (400.35, 18.46),
    "pr_interval": (159.73, 21.00),
    "avg_rr_interval": (927.10, 130.37),
    "t_axis": (32.04, 20.88),
}
TEST_MALE_FRACTION = 208 / 395

DEFAULT_EFFECTS = {
    "age": 0.8, "bmi": 0.8, "waist_cm": 0.8,
    "sex": 0.4, "systolic_bp": 0.4, "diastolic_bp": 0.4,
    "qrs_duration": 0.35, "qt_interval": 0.35, "qt_corrected": 0.35,
    "pr_interval": 0.35, "avg_rr_interval": 0.35, "t_axis": 0.35,
}

OUTLIER_FACTOR_RANGE = (2.0, 4.0)


@dataclass(frozen=True)
class GenConfig:
    n: int
    prevalence: float
    features: dict  # name -> (mean, sd) for continuous features
    male_fraction: float
    effects: dict = field(default_factory=dict)  # name -> shift in SD units; absent means 0
    missing_rate: float = 0.0
    outlier_rate: float = 0.0
    seed: int = 0
    exact_prevalence: bool = False
    id_prefix: str = "P"

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if not 0.0 < self.prevalence < 1.0:
            raise ConfigError("prevalence must be in (0, 1)")
        if not 0.0 <= self.male_fraction <= 1.0:
            raise ConfigError("male_fraction must be in [0, 1]")
        for name, (_, sd) in self.features.items():
            if not sd > 0:
                raise ConfigError(f"sd of {name} must be > 0")
        for rate in ("missing_rate", "outlier_rate"):
            if not 0.0 <= getattr(self, rate) < 0.5:
                raise ConfigError(f"{rate} must be in [0, 0.5)")
        q = self.prevalence * (1.0 - self.prevalence)
        for name, e in self.effects.items():
            if q * e * e >= 1.0:
                raise ConfigError(f"effect {e} for {name} is too large for prevalence {self.prevalence}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["features"] = {k: list(v) for k, v in self.features.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GenConfig":
        d = dict(d)
        d["features"] = {k: tuple(v) for k, v in d["features"].items()}
        return cls(**d)


def default_scenario(seed: int = 0, null: bool = False) -> tuple[GenConfig, GenConfig]:
    """Development (n=2043, 1107 cases) and longitudinal test (n=395, 140 cases) configs."""
    effects = {} if null else dict(DEFAULT_EFFECTS)
    common = dict(effects=effects, missing_rate=0.02, outlier_rate=0.01, exact_prevalence=True)
    dev = GenConfig(n=2043, prevalence=1107 / 2043, features=dict(DEV_PROFILE),
                    male_fraction=DEV_MALE_FRACTION, seed=derive_seed(seed, "dev"), id_prefix="D", **common)
    test = GenConfig(n=395, prevalence=140 / 395, features=dict(TEST_PROFILE),
                     male_fraction=TEST_MALE_FRACTION, seed=derive_seed(seed, "test"), id_prefix="T", **common)
    return dev, test


def _labels(cfg: GenConfig, rng: Xoshiro256) -> np.ndarray:
    if cfg.exact_prevalence:
        y = np.zeros(cfg.n, dtype=np.int64)
        y[: int(round(cfg.n * cfg.prevalence))] = 1
        return y[rng.permutation(cfg.n)]
    return (rng.random(cfg.n) < cfg.prevalence).astype(np.int64)


def sample_features(cfg: GenConfig, schema: FeatureSchema = DEFAULT_SCHEMA):
    """Draw ``(values, labels)``; ``values`` is ``n x d`` with NaN for missing cells."""
    rng = Xoshiro256(cfg.seed)
    y = _labels(cfg, rng)
    centred = y - cfg.prevalence
    q = cfg.prevalence * (1.0 - cfg.prevalence)
    X = np.empty((cfg.n, len(schema.features)))
    for j, f in enumerate(schema.features):
        e = cfg.effects.get(f.name, 0.0)
        if f.kind == CATEGORICAL:
            pm = cfg.male_fraction
            p_row = np.clip(pm + centred * e * np.sqrt(pm * (1 - pm)), 0.0, 1.0)
            X[:, j] = (rng.random(cfg.n) < p_row).astype(float)
        else:
            if f.name not in cfg.features:
                raise ConfigError(f"no (mean, sd) configured for {f.name}")
            mean, sd = cfg.features[f.name]
            within = sd * np.sqrt(1.0 - q * e * e)
            X[:, j] = mean + centred * e * sd + within * rng.normal(cfg.n)
    for j, f in enumerate(schema.features):
        if f.kind == CATEGORICAL:
            continue
        hit = rng.random(cfg.n) < cfg.outlier_rate
        factor = rng.uniform(*OUTLIER_FACTOR_RANGE, cfg.n)
        up = rng.random(cfg.n) < 0.5
        X[:, j] = np.where(hit, np.where(up, X[:, j] * factor, X[:, j] / factor), X[:, j])
    missing = rng.random(X.shape) < cfg.missing_rate
    X[missing] = np.nan
    return X, y


def generate_cohort(cfg: GenConfig, schema: FeatureSchema = DEFAULT_SCHEMA) -> Cohort:
    X, y = sample_features(cfg, schema)
    width = len(str(cfg.n))
    ids = [f"{cfg.id_prefix}{i:0{width}d}" for i in range(1, cfg.n + 1)]
    return cohort_from_arrays(schema, ids, X, y)


def with_effects(cfg: GenConfig, effects: dict) -> GenConfig:
    return replace(cfg, effects=dict(effects))
