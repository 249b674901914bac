"""Imputation, IQR outlier replacement and min-max scaling.

Statistics are fitted on a training matrix only and then applied to any
other matrix, which keeps held-out folds out of every fitted number.
Continuous columns go through impute -> outlier-replace -> scale.
Categorical columns (sex) are mode-imputed and clipped into [0, 1].
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .cohort import CATEGORICAL, CONTINUOUS
from .errors import DimensionError, FitError

IQR_MULTIPLIER = 1.5


@dataclass(frozen=True)
class ColumnState:
    name: str
    kind: str
    impute_mean: Optional[float] = None
    q1: Optional[float] = None
    q3: Optional[float] = None
    lower_fence: Optional[float] = None
    upper_fence: Optional[float] = None
    clean_mean: Optional[float] = None
    min: Optional[float] = None
    max: Optional[float] = None
    impute_mode: Optional[float] = None


@dataclass(frozen=True)
class PreprocessorState:
    columns: tuple[ColumnState, ...]

    def to_dict(self) -> dict:
        return {"columns": [asdict(c) for c in self.columns]}

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessorState":
        return cls(tuple(ColumnState(**c) for c in d["columns"]))

    def save(self, path) -> None:
        from .serialize import dumps

        Path(path).write_text(dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "PreprocessorState":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _as_masked(matrix) -> np.ma.MaskedArray:
    m = np.ma.masked_invalid(np.ma.asarray(matrix, dtype=float))
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def _fit_continuous(name: str, col: np.ma.MaskedArray) -> ColumnState:
    present = col.compressed()
    impute_mean = float(present.mean())
    filled = col.filled(impute_mean)
    q1, q3 = (float(q) for q in np.quantile(filled, [0.25, 0.75]))
    iqr = q3 - q1
    lo, hi = q1 - IQR_MULTIPLIER * iqr, q3 + IQR_MULTIPLIER * iqr
    inside = (filled >= lo) & (filled <= hi)
    clean_mean = float(filled[inside].mean())
    cleaned = np.where(inside, filled, clean_mean)
    return ColumnState(
        name=name, kind=CONTINUOUS, impute_mean=impute_mean, q1=q1, q3=q3,
        lower_fence=lo, upper_fence=hi, clean_mean=clean_mean,
        min=float(cleaned.min()), max=float(cleaned.max()),
    )


def _fit_categorical(name: str, col: np.ma.MaskedArray) -> ColumnState:
    values, counts = np.unique(col.compressed(), return_counts=True)
    # np.unique sorts, so argmax picks the smallest value among ties
    return ColumnState(name=name, kind=CATEGORICAL, impute_mode=float(values[np.argmax(counts)]))


def fit_preprocessor(train_matrix, kinds: Sequence[str], names: Optional[Sequence[str]] = None) -> PreprocessorState:
    m = _as_masked(train_matrix)
    n, d = m.shape
    if len(kinds) != d:
        raise DimensionError(f"{len(kinds)} kinds for {d} columns")
    if n < 2:
        raise FitError(f"need at least 2 rows to fit, got {n}")
    names = list(names) if names is not None else [f"col{j}" for j in range(d)]
    cols = []
    for j, (kind, name) in enumerate(zip(kinds, names)):
        col = m[:, j]
        if col.count() == 0:
            raise FitError(f"column {name!r} has no present values")
        if kind == CONTINUOUS:
            cols.append(_fit_continuous(name, col))
        elif kind == CATEGORICAL:
            cols.append(_fit_categorical(name, col))
        else:
            raise FitError(f"column {name!r}: unknown kind {kind!r}")
    return PreprocessorState(tuple(cols))


def apply_preprocessor(state: PreprocessorState, matrix) -> np.ndarray:
    m = _as_masked(matrix)
    if m.shape[1] != len(state.columns):
        raise DimensionError(f"matrix has {m.shape[1]} columns, state has {len(state.columns)}")
    out = np.empty(m.shape)
    for j, c in enumerate(state.columns):
        if c.kind == CATEGORICAL:
            out[:, j] = m[:, j].filled(c.impute_mode)
            continue
        x = m[:, j].filled(c.impute_mean)
        x = np.where((x < c.lower_fence) | (x > c.upper_fence), c.clean_mean, x)
        span = c.max - c.min
        out[:, j] = (x - c.min) / span if span > 0 else 0.0
    return np.clip(out, 0.0, 1.0)
