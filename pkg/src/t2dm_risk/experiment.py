"""Cross-validation, final training and bootstrap evaluation.

Seeding contract: every task draws from its own generator seeded with
``derive_seed(root, <task labels>)``. Fold plans use
``(train.seed, "folds")``, training uses ``(train.seed, context, fold,
model)`` and bootstraps use ``(bootstrap.seed, context, fold, model)``,
so results do not depend on how many workers run the tasks.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import metrics
from .cohort import Cohort
from .errors import ConfigError, LeakageError, UndefinedMetricError
from .nn import ArchSpec, ModelParams, TrainConfig, predict, train
from .preprocess import PreprocessorState, apply_preprocessor, fit_preprocessor
from .reclass import ComparisonReport, compare_models
from .resample import BootstrapSpec, bootstrap_statistic, percentile_ci
from .rng import Xoshiro256, derive_seed
from .stratify import GroupStats, assign_risk_groups, group_ppv

MODEL_NAMES = ("crf_only", "ecg_only", "fused")
METRIC_NAMES = ("auroc", "auprc", "sensitivity", "specificity", "ppv", "npv", "f1", "brier")
TUNING_WIDTHS = (16, 32)
TUNING_DROPOUTS = (0.1, 0.2)


def n_workers(requested: Optional[int] = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("DIANET_THREADS")
    return max(1, int(env)) if env else 1


def _map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------- models

def model_arch(name: str, width: int = 32, dropout: float = 0.2, d_crf: int = 6, d_ecg: int = 6) -> ArchSpec:
    """Branches of ``width -> width // 2`` ReLU layers; the fused model adds one ``width // 2`` fusion layer."""
    branch = (width, max(1, width // 2))
    if name == "crf_only":
        return ArchSpec((d_crf,), (branch,), (), dropout)
    if name == "ecg_only":
        return ArchSpec((d_ecg,), (branch,), (), dropout)
    if name == "fused":
        return ArchSpec((d_crf, d_ecg), (branch, branch), (max(1, width // 2),), dropout)
    raise ConfigError(f"unknown model {name!r}; choose from {MODEL_NAMES}")


def model_inputs(name: str, crf: np.ndarray, ecg: np.ndarray) -> list[np.ndarray]:
    return {"crf_only": [crf], "ecg_only": [ecg], "fused": [crf, ecg]}[name]


@dataclass(frozen=True)
class ModelSetting:
    width: int = 32
    dropout: float = 0.2


# ------------------------------------------------------------ predictions

@dataclass
class PredictionSet:
    model_name: str
    probs: np.ndarray
    labels: np.ndarray
    ids: Optional[list] = None
    folds: Optional[np.ndarray] = None

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.probs.shape != self.labels.shape:
            raise ValueError("probs and labels differ in length")
        if not np.all(np.isfinite(self.probs)):
            raise ValueError("non-finite probability")


# ------------------------------------------------------------------ folds

@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray
    warning: bool = False

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


def make_folds(labels, k: int, seed: int) -> FoldPlan:
    """Stratified plan: shuffle each class, then deal round-robin.

    Dealing continues across classes (negatives start at the fold after
    the last positive) so fold sizes stay balanced too.
    """
    y = np.asarray(labels).astype(np.int64)
    n = y.size
    if k < 2 or n < k:
        raise ConfigError(f"need 2 <= k <= n, got k={k}, n={n}")
    if y.min() == y.max():
        raise ConfigError("both classes must be present")
    rng = Xoshiro256(seed)
    assign = np.empty(n, dtype=np.int64)
    start = 0
    warning = False
    for cls in (1, 0):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        assign[idx] = (start + np.arange(idx.size)) % k
        start = (start + idx.size) % k
        warning |= idx.size < k
    return FoldPlan(k, assign, bool(warning))


# ------------------------------------------------------------- bootstrap

@dataclass(frozen=True)
class MetricSummary:
    point: float
    mean: float
    sd: float
    ci_low: float
    ci_high: float

    def to_dict(self) -> dict:
        return {"point": self.point, "mean": self.mean, "sd": self.sd,
                "ci_low": self.ci_low, "ci_high": self.ci_high}


def _summary(point: float, values: np.ndarray, level: float) -> MetricSummary:
    """Summary over the defined (non-NaN) bootstrap values; all NaN if none are."""
    values = values[~np.isnan(values)]
    if values.size == 0:
        nan = float("nan")
        return MetricSummary(float(point), nan, nan, nan, nan)
    lo, hi = percentile_ci(values, level)
    sd = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return MetricSummary(float(point), float(np.mean(values)), sd, lo, hi)


def bootstrap_metric(predset: PredictionSet, metric: Callable, spec: BootstrapSpec) -> MetricSummary:
    """Percentile bootstrap of ``metric(probs, labels)`` over prediction rows."""
    p, y = predset.probs, predset.labels
    point = metric(p, y)
    values = bootstrap_statistic(y, lambda idx: metric(p[idx], y[idx]), spec)
    return _summary(point, values, spec.ci_level)


def _threshold_metric(field_name: str, t: float):
    def fn(p, y):
        v = getattr(metrics.confusion_at_threshold(p, y, t), field_name)
        if v is None:
            raise UndefinedMetricError(f"{field_name} undefined")
        return v
    return fn


def metric_functions(threshold: float) -> dict[str, Callable]:
    fns = {"auroc": metrics.auroc, "auprc": metrics.auprc}
    for name in ("sensitivity", "specificity", "ppv", "npv", "f1"):
        fns[name] = _threshold_metric(name, threshold)
    fns["brier"] = metrics.brier
    return fns


@dataclass
class EvalReport:
    model_name: str
    n: int
    prevalence: float
    threshold: float
    metrics: dict[str, MetricSummary]
    boot: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "model": self.model_name,
            "n": self.n,
            "prevalence": self.prevalence,
            "threshold": self.threshold,
            "metrics": {k: v.to_dict() for k, v in self.metrics.items()},
        }


def evaluate(predset: PredictionSet, spec: BootstrapSpec) -> EvalReport:
    """All metrics with shared resamples.

    Threshold metrics use the Youden threshold of the full prediction set,
    held fixed across resamples. A threshold metric that is undefined on a
    resample (e.g. NPV when every row is called positive) is recorded as
    NaN there; only resamples lacking a class are redrawn.
    """
    p, y = predset.probs, predset.labels
    t = metrics.youden_threshold(p, y)
    fns = metric_functions(t)
    points = {}
    for name, fn in fns.items():
        try:
            points[name] = fn(p, y)
        except UndefinedMetricError:
            points[name] = float("nan")
    values = np.empty((spec.n_resamples, len(fns)))
    row = [0]

    def stat(idx):
        pi, yi = p[idx], y[idx]
        cm = metrics.confusion_at_threshold(pi, yi, t)
        vals = [metrics.auroc(pi, yi), metrics.auprc(pi, yi), cm.sensitivity, cm.specificity,
                cm.ppv, cm.npv, cm.f1, metrics.brier(pi, yi)]
        values[row[0]] = [np.nan if v is None else v for v in vals]
        row[0] += 1
        return 0.0

    bootstrap_statistic(y, stat, spec)
    boot = {name: values[:, j] for j, name in enumerate(fns)}
    summaries = {name: _summary(points[name], boot[name], spec.ci_level) for name in fns}
    return EvalReport(predset.model_name, int(y.size), float(y.mean()), t, summaries, boot)


# --------------------------------------------------------------- fitting

def _design(cohort: Cohort, state: PreprocessorState):
    X = apply_preprocessor(state, cohort.matrix())
    n_crf = len(cohort.schema.crf_features)
    return X[:, :n_crf], X[:, n_crf:]


def fit_preprocessing(cohort: Cohort) -> PreprocessorState:
    return fit_preprocessor(cohort.matrix(), cohort.schema.kinds(), cohort.schema.names)


def fit_model(cohort: Cohort, state: PreprocessorState, name: str, config: TrainConfig,
              setting: ModelSetting = ModelSetting()) -> ModelParams:
    crf, ecg = _design(cohort, state)
    arch = model_arch(name, setting.width, setting.dropout, crf.shape[1], ecg.shape[1])
    return train(model_inputs(name, crf, ecg), cohort.labels, arch, config)


def predict_cohort(params: ModelParams, state: PreprocessorState, cohort: Cohort, name: str) -> np.ndarray:
    crf, ecg = _design(cohort, state)
    return predict(params, model_inputs(name, crf, ecg))


def fit_fold(cohort: Cohort, plan: FoldPlan, fold: int, name: str, config: TrainConfig,
             setting: ModelSetting = ModelSetting()):
    """Preprocessor and model fitted on the training split of one fold only."""
    train_part = cohort.subset(plan.train_indices(fold))
    state = fit_preprocessing(train_part)
    cfg = replace(config, seed=derive_seed(config.seed, "cv", fold, name))
    return state, fit_model(train_part, state, name, cfg, setting)


def _defaults_from(config: TrainConfig, models, settings):
    base = {m: ModelSetting(dropout=config.dropout_rate) for m in models}
    base.update(settings or {})
    return base


def tune_hyperparams(cohort: Cohort, name: str, config: TrainConfig, k: int = 5,
                     workers: Optional[int] = None):
    """Small grid over branch width and dropout, scored by mean validation AUROC."""
    plan = make_folds(cohort.labels, k, derive_seed(config.seed, "folds"))
    grid = [ModelSetting(w, d) for w in TUNING_WIDTHS for d in TUNING_DROPOUTS]
    tasks = [(s, f) for s in grid for f in range(k)]

    def run(task):
        s, f = task
        state, params = fit_fold(cohort, plan, f, name, replace(config, seed=derive_seed(config.seed, "tune")), s)
        test = cohort.subset(plan.test_indices(f))
        return metrics.auroc(predict_cohort(params, state, test, name), test.labels)

    scores = np.array(_map(run, tasks, n_workers(workers))).reshape(len(grid), k).mean(axis=1)
    best = int(np.argmax(scores))
    return grid[best], {f"width={s.width},dropout={s.dropout}": float(sc) for s, sc in zip(grid, scores)}


@dataclass
class CrossValResult:
    plan: FoldPlan
    predictions: dict[str, list[PredictionSet]]
    fold_reports: dict[str, list[EvalReport]]
    aggregate: dict[str, dict[str, MetricSummary]]
    settings: dict[str, ModelSetting]
    tuning: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"k": self.plan.k, "fold_warning": self.plan.warning, "models": {}}
        for m, reports in self.fold_reports.items():
            out["models"][m] = {
                "setting": {"width": self.settings[m].width, "dropout": self.settings[m].dropout},
                "aggregate": {k: v.to_dict() for k, v in self.aggregate[m].items()},
                "folds": [r.to_dict() for r in reports],
            }
        if self.tuning:
            out["tuning"] = self.tuning
        return out


def run_crossval(cohort: Cohort, models: Sequence[str] = MODEL_NAMES, train_config: TrainConfig = TrainConfig(),
                 bootstrap_spec: BootstrapSpec = BootstrapSpec(), k: int = 5, workers: Optional[int] = None,
                 tune: bool = False, settings: Optional[dict] = None) -> CrossValResult:
    y = cohort.labels
    if y.min() == y.max():
        raise ConfigError("cross-validation needs both classes")
    workers = n_workers(workers)
    settings = _defaults_from(train_config, models, settings)
    tuning = {}
    if tune:
        for m in models:
            settings[m], tuning[m] = tune_hyperparams(cohort, m, train_config, k, workers)
    plan = make_folds(y, k, derive_seed(train_config.seed, "folds"))
    tasks = [(f, m) for f in range(k) for m in models]

    def run(task):
        f, m = task
        state, params = fit_fold(cohort, plan, f, m, train_config, settings[m])
        idx = plan.test_indices(f)
        test = cohort.subset(idx)
        ps = PredictionSet(m, predict_cohort(params, state, test, m), test.labels,
                           ids=test.ids, folds=np.full(idx.size, f))
        spec = replace(bootstrap_spec, seed=derive_seed(bootstrap_spec.seed, "cv", f, m))
        return ps, evaluate(ps, spec)

    results = dict(zip(tasks, _map(run, tasks, workers)))
    predictions = {m: [results[(f, m)][0] for f in range(k)] for m in models}
    fold_reports = {m: [results[(f, m)][1] for f in range(k)] for m in models}
    aggregate = {}
    for m in models:
        agg = {}
        for name in METRIC_NAMES:
            pooled = np.concatenate([r.boot[name] for r in fold_reports[m]])
            point = float(np.nanmean([r.metrics[name].point for r in fold_reports[m]]))
            agg[name] = _summary(point, pooled, bootstrap_spec.ci_level)
        aggregate[m] = agg
    return CrossValResult(plan, predictions, fold_reports, aggregate, settings, tuning)


# --------------------------------------------------------- longitudinal

@dataclass
class LongitudinalResult:
    predictions: dict[str, PredictionSet]
    reports: dict[str, EvalReport]
    comparison: Optional[ComparisonReport]
    compared: tuple[str, str]
    groups: dict[str, dict[str, GroupStats]]
    preprocessor: PreprocessorState
    params: dict[str, ModelParams]

    def to_dict(self) -> dict:
        return {
            "models": {m: r.to_dict() for m, r in self.reports.items()},
            "risk_groups": {m: {g: vars(s) for g, s in gs.items()} for m, gs in self.groups.items()},
        }


def check_disjoint(dev: Cohort, test: Cohort) -> None:
    overlap = set(dev.ids) & set(test.ids)
    if overlap:
        raise LeakageError(f"{len(overlap)} participant ids appear in both cohorts, e.g. {sorted(overlap)[0]!r}")
    if dev.schema != test.schema:
        raise ConfigError("development and test cohorts use different schemas")


def run_longitudinal(dev: Cohort, test: Cohort, models: Sequence[str] = MODEL_NAMES,
                     train_config: TrainConfig = TrainConfig(), bootstrap_spec: BootstrapSpec = BootstrapSpec(),
                     compare: Optional[tuple[str, str]] = ("fused", "crf_only"), workers: Optional[int] = None,
                     settings: Optional[dict] = None, evaluate_bootstrap: bool = True) -> LongitudinalResult:
    """Fit on the whole development cohort, predict the test cohort, compare ``compare = (new, base)``."""
    check_disjoint(dev, test)
    workers = n_workers(workers)
    settings = _defaults_from(train_config, models, settings)
    state = fit_preprocessing(dev)

    def run(m):
        cfg = replace(train_config, seed=derive_seed(train_config.seed, "final", m))
        params = fit_model(dev, state, m, cfg, settings[m])
        ps = PredictionSet(m, predict_cohort(params, state, test, m), test.labels, ids=test.ids)
        return params, ps

    fitted = dict(zip(models, _map(run, list(models), workers)))
    params = {m: fitted[m][0] for m in models}
    predictions = {m: fitted[m][1] for m in models}
    reports = {}
    if evaluate_bootstrap:
        reports = {m: evaluate(predictions[m], replace(bootstrap_spec, seed=derive_seed(bootstrap_spec.seed, "test", m)))
                   for m in models}
    groups = {m: group_ppv(assign_risk_groups(predictions[m].probs), test.labels) for m in models}
    comparison = None
    if compare is not None:
        new, base = compare
        for m in compare:
            if m not in predictions:
                raise ConfigError(f"cannot compare {m!r}: it was not trained")
        comparison = compare_models(predictions[base].probs, predictions[new].probs, test.labels,
                                    replace(bootstrap_spec, seed=derive_seed(bootstrap_spec.seed, "compare")))
    return LongitudinalResult(predictions, reports, comparison, tuple(compare or ()), groups, state, params)
