"""Paired bootstrap resampling over prediction rows."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BootstrapError, ConfigError, UndefinedMetricError
from .rng import Xoshiro256

MAX_RETRIES = 100


@dataclass(frozen=True)
class BootstrapSpec:
    n_resamples: int = 1000
    seed: int = 0
    ci_level: float = 0.95

    def __post_init__(self):
        if self.n_resamples < 1:
            raise ConfigError("n_resamples must be >= 1")
        if not 0.0 < self.ci_level < 1.0:
            raise ConfigError("ci_level must be in (0, 1)")


def _both_classes(labels: np.ndarray) -> bool:
    s = labels.sum()
    return 0 < s < labels.size


def bootstrap_statistic(
    labels,
    statistic: Callable[[np.ndarray], float],
    spec: BootstrapSpec,
    require_both_classes: bool = True,
) -> np.ndarray:
    """Evaluate ``statistic(indices)`` on ``spec.n_resamples`` row resamples.

    A resample is redrawn when it lacks a class (if required) or when the
    statistic raises :class:`UndefinedMetricError`; after ``MAX_RETRIES``
    redraws of one resample a :class:`BootstrapError` is raised.
    """
    y = np.asarray(labels)
    n = y.size
    if n == 0:
        raise BootstrapError("nothing to resample")
    rng = Xoshiro256(spec.seed)
    out = np.empty(spec.n_resamples)
    for b in range(spec.n_resamples):
        for _ in range(MAX_RETRIES + 1):
            idx = rng.integers(n, n)
            if require_both_classes and not _both_classes(y[idx]):
                continue
            try:
                out[b] = statistic(idx)
            except UndefinedMetricError:
                continue
            break
        else:
            raise BootstrapError(f"resample {b}: statistic undefined after {MAX_RETRIES} redraws")
    return out


def percentile_ci(values: np.ndarray, level: float) -> tuple[float, float]:
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(values, [alpha, 1.0 - alpha])
    return float(lo), float(hi)
