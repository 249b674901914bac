"""Cohort data model and CSV ingestion."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import LabelError, ParseError, SchemaError

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
MISSING_TOKENS = ("", "NA")


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str = CONTINUOUS
    unit: str = ""


@dataclass(frozen=True)
class FeatureSchema:
    crf_features: tuple[Feature, ...]
    ecg_features: tuple[Feature, ...]

    def __post_init__(self):
        if len(self.crf_features) != 6 or len(self.ecg_features) != 6:
            raise SchemaError("schema needs exactly 6 CRF and 6 ECG features")
        names = self.names
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        for f in self.features:
            if f.kind not in (CONTINUOUS, CATEGORICAL):
                raise SchemaError(f"unknown feature kind {f.kind!r} for {f.name}")
        cats = [f.name for f in self.features if f.kind == CATEGORICAL]
        if cats != ["sex"]:
            raise SchemaError("sex must be the only categorical feature")

    @property
    def features(self) -> tuple[Feature, ...]:
        return self.crf_features + self.ecg_features

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def crf_names(self) -> list[str]:
        return [f.name for f in self.crf_features]

    @property
    def ecg_names(self) -> list[str]:
        return [f.name for f in self.ecg_features]

    def kinds(self, which: str = "all") -> list[str]:
        feats = {"all": self.features, "crf": self.crf_features, "ecg": self.ecg_features}[which]
        return [f.kind for f in feats]


DEFAULT_SCHEMA = FeatureSchema(
    crf_features=(
        Feature("age", CONTINUOUS, "years"),
        Feature("sex", CATEGORICAL, "0=female,1=male"),
        Feature("bmi", CONTINUOUS, "kg/m2"),
        Feature("waist_cm", CONTINUOUS, "cm"),
        Feature("systolic_bp", CONTINUOUS, "mmHg"),
        Feature("diastolic_bp", CONTINUOUS, "mmHg"),
    ),
    ecg_features=(
        Feature("qrs_duration", CONTINUOUS, "ms"),
        Feature("qt_interval", CONTINUOUS, "ms"),
        Feature("qt_corrected", CONTINUOUS, "ms"),
        Feature("pr_interval", CONTINUOUS, "ms"),
        Feature("avg_rr_interval", CONTINUOUS, "ms"),
        Feature("t_axis", CONTINUOUS, "degrees"),
    ),
)


@dataclass(frozen=True)
class Record:
    id: str
    values: tuple[Optional[float], ...]
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise LabelError(f"record {self.id}: label {self.label!r} not in {{0,1}}")
        for v in self.values:
            if v is not None and not math.isfinite(v):
                raise ParseError(f"record {self.id}: non-finite value {v!r}")


@dataclass(frozen=True)
class Cohort:
    schema: FeatureSchema
    rows: tuple[Record, ...]
    label_name: str = "label"

    def __post_init__(self):
        if len(self.rows) < 1:
            raise ParseError("cohort has no rows")
        width = len(self.schema.features)
        for r in self.rows:
            if len(r.values) != width:
                raise SchemaError(f"record {r.id} has {len(r.values)} values, schema has {width}")

    def __len__(self):
        return len(self.rows)

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.rows]

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.rows], dtype=np.int64)

    def matrix(self) -> np.ma.MaskedArray:
        """All features in schema order as an ``n x 12`` masked array."""
        n, d = len(self.rows), len(self.schema.features)
        data = np.zeros((n, d))
        mask = np.zeros((n, d), dtype=bool)
        for i, r in enumerate(self.rows):
            for j, v in enumerate(r.values):
                if v is None:
                    mask[i, j] = True
                else:
                    data[i, j] = v
        return np.ma.MaskedArray(data, mask=mask)

    def subset(self, indices: Sequence[int]) -> "Cohort":
        return Cohort(self.schema, tuple(self.rows[i] for i in indices), self.label_name)


def cohort_from_arrays(schema: FeatureSchema, ids, values, labels, label_name="label") -> Cohort:
    """Build a Cohort from an ``n x d`` array where NaN or masked entries mean missing."""
    arr = np.ma.masked_invalid(np.ma.asarray(values, dtype=float))
    mask = np.ma.getmaskarray(arr)
    data = np.ma.getdata(arr)
    rows = []
    for i, rid in enumerate(ids):
        vals = tuple(None if mask[i, j] else float(data[i, j]) for j in range(data.shape[1]))
        rows.append(Record(str(rid), vals, int(labels[i])))
    return Cohort(schema, tuple(rows), label_name)


def split_modalities(cohort: Cohort):
    """Return ``(crf_matrix, ecg_matrix, labels)`` as masked arrays in schema order."""
    full = cohort.matrix()
    n_crf = len(cohort.schema.crf_features)
    return full[:, :n_crf], full[:, n_crf:], cohort.labels


def _parse_value(text: str, feature: Feature, row: int) -> Optional[float]:
    text = text.strip()
    if text in MISSING_TOKENS:
        return None
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"row {row}: column {feature.name!r}: cannot parse {text!r} as a number") from None
    if not math.isfinite(v):
        raise ParseError(f"row {row}: column {feature.name!r}: non-finite value {text!r}")
    if feature.kind == CATEGORICAL and v not in (0.0, 1.0):
        raise ParseError(f"row {row}: column {feature.name!r}: category {text!r} not in {{0,1}}")
    return v


def load_cohort(path, schema: FeatureSchema = DEFAULT_SCHEMA, label_name: str = "label") -> Cohort:
    """Read a cohort CSV. Column order is free; rows are numbered from 1 after the header."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        seen = set()
        for h in header:
            if h in seen:
                raise SchemaError(f"duplicate column {h!r}")
            seen.add(h)
        expected = ["id"] + schema.names + [label_name]
        for name in expected:
            if name not in seen:
                raise SchemaError(f"missing column {name!r}")
        extra = [h for h in header if h not in expected]
        if extra:
            raise SchemaError(f"unexpected column {extra[0]!r}")
        pos = {h: i for i, h in enumerate(header)}

        rows = []
        for rownum, cells in enumerate(reader, start=1):
            if not cells:
                continue
            if len(cells) != len(header):
                raise ParseError(f"row {rownum}: expected {len(header)} cells, got {len(cells)}")
            values = tuple(_parse_value(cells[pos[f.name]], f, rownum) for f in schema.features)
            lab = cells[pos[label_name]].strip()
            try:
                label = int(float(lab))
                ok = float(lab) == label
            except ValueError:
                ok = False
            if not ok or label not in (0, 1):
                raise LabelError(f"row {rownum}: label {lab!r} not in {{0,1}}")
            rows.append(Record(cells[pos["id"]].strip(), values, label))
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return Cohort(schema, tuple(rows), label_name)


def _fmt(v: Optional[float], feature: Feature) -> str:
    if v is None:
        return ""
    if feature.kind == CATEGORICAL:
        return str(int(v))
    return repr(float(v))


def write_cohort(cohort: Cohort, path) -> None:
    path = Path(path)
    feats = cohort.schema.features
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id"] + cohort.schema.names + [cohort.label_name])
        for r in cohort.rows:
            w.writerow([r.id] + [_fmt(v, f) for v, f in zip(r.values, feats)] + [r.label])
