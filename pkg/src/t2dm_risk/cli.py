"""Command-line entry point.

    t2dm-risk generate     --out DIR [--scenario default|null] [--seed N]
    t2dm-risk cv           --out DIR [--dev PATH] [--folds K] [--bootstraps N] [--models LIST]
    t2dm-risk predict-risk --out DIR [--dev PATH] [--test PATH] [--compare NEW,BASE]
    t2dm-risk stratify     --out DIR [--predictions PATH]

Every command also takes ``--config FILE`` (JSON) and dotted overrides of
any leaf, e.g. ``--train.epochs 5`` or ``--gen.missing_rate 0.05``.
Precedence: built-in defaults < config file < named flags < dotted flags.

Exit codes: 0 ok, 1 output I/O failure, 2 usage, 3 input/parse,
4 leakage, 5 analysis precondition.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import metrics
from .cohort import DEFAULT_SCHEMA, load_cohort, write_cohort
from .errors import AnalysisError, CohortError, ConfigError, LeakageError, RiskModelError, StratificationError
from .experiment import MODEL_NAMES, run_crossval, run_longitudinal
from .nn import TrainConfig
from .resample import BootstrapSpec
from .rng import derive_seed
from .serialize import write_csv, write_json
from .stratify import GROUPS, assign_risk_groups, group_ppv
from .synthgen import GenConfig, default_scenario, generate_cohort

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_INPUT, EXIT_LEAKAGE, EXIT_ANALYSIS = 0, 1, 2, 3, 4, 5
SCENARIOS = ("default", "null")


def default_config() -> dict:
    train = {f.name: getattr(TrainConfig(), f.name) for f in fields(TrainConfig) if f.name != "seed"}
    return {
        "seed": 0,
        "scenario": "default",
        "folds": 5,
        "models": list(MODEL_NAMES),
        "compare": ["fused", "crf_only"],
        "tune": False,
        "train": train,
        "bootstrap": {"n_resamples": 1000, "ci_level": 0.95},
        "gen": {},
        "paths": {"dev": None, "test": None, "predictions": None},
    }


def _parse_scalar(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_dotted(cfg: dict, key: str, value) -> None:
    parts = key.split(".")
    node = cfg
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"--{key}: {p!r} is not a section")
    node[parts[-1]] = value


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def resolve_config(args, dotted: list[str]) -> dict:
    cfg = default_config()
    if args.config:
        try:
            cfg = _merge(cfg, json.loads(Path(args.config).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    named = {"seed": args.seed, "scenario": getattr(args, "scenario", None), "folds": getattr(args, "folds", None)}
    for k, v in named.items():
        if v is not None:
            cfg[k] = v
    if getattr(args, "bootstraps", None) is not None:
        cfg["bootstrap"]["n_resamples"] = args.bootstraps
    if getattr(args, "models", None):
        cfg["models"] = [m.strip() for m in args.models.split(",") if m.strip()]
    if getattr(args, "compare", None):
        cfg["compare"] = [m.strip() for m in args.compare.split(",")]
    if getattr(args, "tune", False):
        cfg["tune"] = True
    for opt in ("dev", "test", "predictions"):
        if getattr(args, opt, None):
            cfg["paths"][opt] = getattr(args, opt)
    i = 0
    while i < len(dotted):
        tok = dotted[i]
        if not tok.startswith("--") or "." not in tok:
            raise ConfigError(f"unrecognized argument {tok!r}")
        if "=" in tok:
            key, val = tok[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(dotted):
                raise ConfigError(f"{tok} needs a value")
            key, val = tok[2:], dotted[i + 1]
            i += 2
        _set_dotted(cfg, key, _parse_scalar(val))
    for m in cfg["models"]:
        if m not in MODEL_NAMES:
            raise ConfigError(f"unknown model {m!r}; choose from {', '.join(MODEL_NAMES)}")
    return cfg


def train_config(cfg: dict) -> TrainConfig:
    try:
        return TrainConfig(seed=int(cfg["seed"]), **cfg["train"])
    except TypeError as exc:
        raise ConfigError(f"bad train section: {exc}") from None


def bootstrap_spec(cfg: dict) -> BootstrapSpec:
    try:
        return BootstrapSpec(seed=derive_seed(int(cfg["seed"]), "bootstrap"), **cfg["bootstrap"])
    except TypeError as exc:
        raise ConfigError(f"bad bootstrap section: {exc}") from None


def _gen_configs(cfg: dict) -> tuple[GenConfig, GenConfig]:
    if cfg["scenario"] not in SCENARIOS:
        raise ConfigError(f"unknown scenario {cfg['scenario']!r}; choose from {', '.join(SCENARIOS)}")
    dev, test = default_scenario(int(cfg["seed"]), null=cfg["scenario"] == "null")
    over = dict(cfg.get("gen") or {})
    both = {k: v for k, v in over.items() if k not in ("dev", "test")}
    try:
        dev = replace(dev, **both, **over.get("dev", {}))
        test = replace(test, **both, **over.get("test", {}))
    except TypeError as exc:
        raise ConfigError(f"bad gen section: {exc}") from None
    return dev, test


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(path, what: str):
    p = Path(path)
    if not p.is_file():
        raise CohortError(f"{what} cohort not found: {p}")
    return load_cohort(p, DEFAULT_SCHEMA)


def _provenance(cfg: dict, command: str) -> dict:
    return {"command": command, "seed": cfg["seed"], "config": cfg}


# ------------------------------------------------------------- commands

def cmd_generate(args, cfg) -> int:
    out = _out_dir(args)
    gen_dev, gen_test = _gen_configs(cfg)
    for name, gc in (("dev", gen_dev), ("test", gen_test)):
        cohort = generate_cohort(gc)
        write_cohort(cohort, out / f"{name}.csv")
        y = cohort.labels
        print(f"{name}.csv: {len(cohort)} rows, {int(y.sum())} positive, prevalence {y.mean():.4f}")
    write_json({**_provenance(cfg, "generate"), "dev": gen_dev.to_dict(), "test": gen_test.to_dict()},
               out / "generate_config.json")
    return EXIT_OK


def cmd_cv(args, cfg) -> int:
    out = _out_dir(args)
    dev = _load(cfg["paths"]["dev"] or out / "dev.csv", "development")
    res = run_crossval(dev, cfg["models"], train_config(cfg), bootstrap_spec(cfg), k=int(cfg["folds"]),
                       tune=bool(cfg["tune"]))
    write_json({**_provenance(cfg, "cv"), "report": res.to_dict()}, out / "cv_report.json")
    rows = []
    for m, sets in res.predictions.items():
        for ps in sets:
            for rid, f, p, y in zip(ps.ids, ps.folds, ps.probs, ps.labels):
                rows.append((rid, m, int(f), float(p), int(y)))
    write_csv(out / "cv_predictions.csv", ["id", "model", "fold", "prob", "label"], rows)
    for m, agg in res.aggregate.items():
        a = agg["auroc"]
        print(f"{m:>9}: AUROC {a.mean:.4f} +/- {a.sd:.4f} (95% CI {a.ci_low:.4f}-{a.ci_high:.4f})")
    return EXIT_OK


def cmd_predict_risk(args, cfg) -> int:
    out = _out_dir(args)
    dev = _load(cfg["paths"]["dev"] or out / "dev.csv", "development")
    test = _load(cfg["paths"]["test"] or out / "test.csv", "test")
    compare = tuple(cfg["compare"]) if cfg.get("compare") else None
    if compare is not None and len(compare) != 2:
        raise ConfigError("--compare takes exactly two models: NEW,BASE")
    models = list(cfg["models"])
    for m in compare or ():
        if m not in models:
            models.append(m)
    res = run_longitudinal(dev, test, models, train_config(cfg), bootstrap_spec(cfg), compare=compare)

    write_json({**_provenance(cfg, "predict-risk"), "report": res.to_dict()}, out / "test_report.json")
    if res.comparison is not None:
        write_json({**_provenance(cfg, "predict-risk"), "new": compare[0], "base": compare[1],
                    **res.comparison.to_dict()}, out / "comparison.json")
    roc_rows, pr_rows, cal_rows, pred_rows = [], [], [], []
    for m, ps in res.predictions.items():
        roc = metrics.roc_curve(ps.probs, ps.labels)
        roc_rows += [(m, f, t, th) for f, t, th in roc.points]
        pr = metrics.pr_curve(ps.probs, ps.labels)
        pr_rows += [(m, r, p, th) for r, p, th in zip(pr.recall, pr.precision, pr.thresholds)]
        cal = metrics.calibration_bins(ps.probs, ps.labels)
        cal_rows += [(m, mp, fp, c) for mp, fp, c in cal.bins]
        pred_rows += [(rid, m, float(p), int(y)) for rid, p, y in zip(ps.ids, ps.probs, ps.labels)]
    write_csv(out / "roc.csv", ["model", "fpr", "tpr", "threshold"], roc_rows)
    write_csv(out / "pr.csv", ["model", "recall", "precision", "threshold"], pr_rows)
    write_csv(out / "calibration.csv", ["model", "mean_pred", "frac_pos", "count"], cal_rows)
    write_csv(out / "test_predictions.csv", ["id", "model", "prob", "label"], pred_rows)
    res.preprocessor.save(out / "preprocessor.json")
    for m, params in res.params.items():
        params.save(out / f"model_{m}.json")
    for m, r in res.reports.items():
        a, b = r.metrics["auroc"], r.metrics["brier"]
        print(f"{m:>9}: AUROC {a.point:.4f} (95% CI {a.ci_low:.4f}-{a.ci_high:.4f}), Brier {b.point:.4f}")
    if res.comparison is not None:
        c = res.comparison
        print(f"{compare[0]} vs {compare[1]}: DeLong p={c.delong_p:.4g}, NRI={c.nri:.4f}, "
              f"cNRI={c.cnri:.4f}, IDI={c.idi:.4f}")
    return EXIT_OK


def read_predictions(path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    p = Path(path)
    if not p.is_file():
        raise CohortError(f"predictions file not found: {p}")
    by_model: dict[str, tuple[list, list]] = {}
    with p.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"prob", "label"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise CohortError(f"{p}: predictions need columns {sorted(need)}")
        for i, row in enumerate(reader, start=1):
            m = row.get("model") or "model"
            try:
                prob, label = float(row["prob"]), int(row["label"])
            except ValueError:
                raise CohortError(f"{p}: row {i}: cannot parse prob/label") from None
            probs, labels = by_model.setdefault(m, ([], []))
            probs.append(prob)
            labels.append(label)
    return {m: (np.array(ps), np.array(ys)) for m, (ps, ys) in by_model.items()}


def cmd_stratify(args, cfg) -> int:
    out = _out_dir(args)
    preds = read_predictions(cfg["paths"]["predictions"] or out / "test_predictions.csv")
    if not preds:
        raise StratificationError("no predictions to stratify")
    rows = []
    for m, (probs, labels) in preds.items():
        groups = assign_risk_groups(probs)
        stats = group_ppv(groups, labels)
        for g in GROUPS:
            s = stats[g]
            rows.append((m, g, s.count, s.positives, s.ppv, groups.t_low, groups.t_high))
            ppv = "undefined" if s.ppv is None else f"{s.ppv:.3f}"
            print(f"{m:>9} {g:>6}: n={s.count:4d} positives={s.positives:4d} PPV={ppv}")
    write_csv(out / "groups.csv", ["model", "group", "count", "positives", "ppv", "t_low", "t_high"], rows)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "cv": cmd_cv,
    "predict-risk": cmd_predict_risk,
    "stratify": cmd_stratify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="t2dm-risk", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, help="root seed")

    p = sub.add_parser("generate", help="write synthetic dev.csv and test.csv")
    common(p)
    p.add_argument("--scenario", help="default or null (no signal)")

    p = sub.add_parser("cv", help="stratified cross-validation on the development cohort")
    common(p)
    p.add_argument("--dev")
    p.add_argument("--folds", type=int)
    p.add_argument("--bootstraps", type=int)
    p.add_argument("--models", help="comma-separated subset of " + ",".join(MODEL_NAMES))
    p.add_argument("--tune", action="store_true", help="grid-search width and dropout first")

    p = sub.add_parser("predict-risk", help="train on dev, evaluate and compare on test")
    common(p)
    p.add_argument("--dev")
    p.add_argument("--test")
    p.add_argument("--bootstraps", type=int)
    p.add_argument("--models")
    p.add_argument("--compare", help="NEW,BASE model pair (default fused,crf_only)")

    p = sub.add_parser("stratify", help="Low/Medium/High risk groups and PPV from a predictions CSV")
    common(p)
    p.add_argument("--predictions")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        cfg = resolve_config(args, extra)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CohortError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except LeakageError as exc:
        print(f"leakage error: {exc}", file=sys.stderr)
        return EXIT_LEAKAGE
    except AnalysisError as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except RiskModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
