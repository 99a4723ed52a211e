"""Command-line entry point.

    dvpadmm synth --n 4000 --dim 10 --output data.csv
    dvpadmm train --config configs/baseline.yaml --out-dir runs/base
    dvpadmm private-train --config configs/dvp.yaml --alpha 0.5
    dvpadmm sweep --config configs/dvp.yaml --alphas 0.01 0.1 0.5 1
    dvpadmm tune --sweep runs/sweep/sweep.csv
    dvpadmm roc --scores runs/base/seed_0/scores.csv --output roc.csv
    dvpadmm preprocess --input KDDTrain+.txt --output train.csv --spec-out spec.json
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import dataset, harness, metrics, tuning
from .errors import ConfigError, DVPError


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # Parsed both before and after the subcommand; SUPPRESS keeps the
    # subparser from clobbering values given before it.
    default = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=default, help="YAML experiment config")
    p.add_argument("--seed", type=int, default=default, help="run a single seed")
    p.add_argument("--out-dir", default=default, help="output directory")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dvpadmm", parents=[_global_flags(False)],
                                     description="Private distributed intrusion detection by ADMM.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    common = _global_flags(True)

    p = sub.add_parser("preprocess", parents=[common], help="fit and apply the NSL-KDD pipeline")
    p.add_argument("--input", required=True, help="raw NSL-KDD file (fit on this)")
    p.add_argument("--output", required=True, help="processed CSV")
    p.add_argument("--apply", nargs=2, metavar=("RAW", "OUT"), action="append", default=[],
                   help="also transform another raw file with the fitted pipeline")
    p.add_argument("--spec-out", help="write the fitted pipeline as JSON")
    p.add_argument("--features", nargs="+", help="keep only these raw columns")

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic labelled dataset")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--separation", type=float, default=2.0)
    p.add_argument("--output", required=True)

    for name, helptext in (("train", "non-private consensus ADMM"),
                           ("private-train", "DVP-ADMM")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--data", help="processed CSV; overrides the config's data source")
        p.add_argument("--test-data", help="processed CSV used as the test set")
        p.add_argument("--nodes", type=int)
        p.add_argument("--T", type=int)
        p.add_argument("--jobs", type=int, default=1)
        if name == "private-train":
            p.add_argument("--alpha", type=float)

    p = sub.add_parser("sweep", parents=[common], help="DVP runs over several alphas")
    p.add_argument("--alphas", type=float, nargs="+", required=True)
    p.add_argument("--data")
    p.add_argument("--test-data")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("tune", parents=[common], help="fit the risk curve and pick alpha")
    p.add_argument("--sweep", required=True, help="CSV with an alpha column")
    p.add_argument("--risk-column", default="mean_final_er")
    p.add_argument("--U1", type=float, help="upper bound on the fitted risk")
    p.add_argument("--cv", type=float, nargs=4, default=[20.0, 6.0, 5.0, 1.0],
                   metavar=("CV1", "CV2", "CV3", "CV4"))
    p.add_argument("--alpha-min", type=float, default=1e-4)

    p = sub.add_parser("roc", parents=[common], help="score file to ROC CSV")
    p.add_argument("--scores", required=True, help="CSV with score and label columns")
    p.add_argument("--output", required=True)
    p.add_argument("--node", type=int, help="restrict to one node's scores")
    p.add_argument("--resolution", type=int)
    return parser


# --- commands ------------------------------------------------------------

def _load_cfg(args) -> harness.ExperimentConfig:
    cfg = harness.load_config(args.config) if args.config else harness.ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["seeds"] = [args.seed]
    if args.out_dir:
        changes["out_dir"] = args.out_dir
    for key in ("nodes", "T"):
        if getattr(args, key, None) is not None:
            changes[key] = getattr(args, key)
    if getattr(args, "data", None):
        data = dataclasses.replace(cfg.data, source="processed", path=args.data,
                                   test_path=args.test_data)
        changes["data"] = data
    cfg = dataclasses.replace(cfg, **changes)
    if cfg.schedule is not None and "T" in changes:
        raise ConfigError("--T cannot override a config with a topology schedule")
    return cfg


def _print_aggregate(agg: dict) -> None:
    for key in ("final_er", "final_mean_loss", "auc", "fpr", "fnr", "final_residual"):
        print(f"{key:16s} {agg[key]['mean']:.6g} +- {agg[key]['std']:.3g}")


def cmd_preprocess(args) -> int:
    records = dataset.load_nslkdd(args.input)
    spec = dataset.fit_preprocess(records, args.features)
    dataset.write_processed(args.output, dataset.transform(spec, records), spec.feature_names)
    for raw, out in args.apply:
        dataset.write_processed(out, dataset.transform(spec, dataset.load_nslkdd(raw)), spec.feature_names)
    if args.spec_out:
        spec.save(args.spec_out)
    print(f"{len(records)} records, {spec.dim} features -> {args.output}")
    return 0


def cmd_synth(args) -> int:
    data = dataset.synthesize(args.n, args.dim, args.separation, args.seed or 0)
    dataset.write_processed(args.output, data)
    print(f"{data.n} samples, {data.d} features -> {args.output}")
    return 0


def cmd_train(args, private: bool) -> int:
    cfg = _load_cfg(args)
    if private:
        cfg = dataclasses.replace(cfg, mode="dvp",
                                  alpha=args.alpha if args.alpha is not None else cfg.alpha)
    else:
        cfg = dataclasses.replace(cfg, mode="nonprivate")
    result = harness.run_experiment(cfg.validate(), jobs=args.jobs)
    _print_aggregate(result.aggregate)
    return 0


def cmd_sweep(args) -> int:
    cfg = dataclasses.replace(_load_cfg(args), mode="dvp")
    rows = harness.sweep_alpha(cfg.validate() if cfg.alpha else cfg, args.alphas, jobs=args.jobs)
    print("alpha,mean_final_er,std_final_er,mean_auc")
    for r in rows:
        print(f"{r['alpha']:g},{r['mean_final_er']:.6g},{r['std_final_er']:.3g},{r['mean_auc']:.4f}")
    return 0


def cmd_tune(args) -> int:
    points = harness.read_sweep(args.sweep, args.risk_column)
    res = tuning.tune(points, tuning.PrivacyUtility(*args.cv), args.U1, args.alpha_min)
    c = res.curve
    print(f"C5={c.c5:.10g} C6={c.c6:.10g} C7={c.c7:.10g}")
    print(f"alpha*={res.alpha_star:.10g} objective={res.objective:.10g}")
    if args.out_dir:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        (Path(args.out_dir) / "tune.json").write_text(json.dumps(res.to_dict(), indent=2))
    return 0


def cmd_roc(args) -> int:
    with open(args.scores, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"score", "label"} <= set(rows[0]):
        raise ConfigError(f"{args.scores}: needs 'score' and 'label' columns")
    if args.node is not None:
        rows = [r for r in rows if int(r.get("node", -1)) == args.node]
    s = np.array([float(r["score"]) for r in rows])
    y = np.array([int(float(r["label"])) for r in rows])
    curve = metrics.roc(s, y, args.resolution)
    curve.to_csv(args.output)
    print(f"AUC={curve.auc:.6f} ({len(curve.points)} points) -> {args.output}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "preprocess":
            return cmd_preprocess(args)
        if args.command == "synth":
            return cmd_synth(args)
        if args.command in ("train", "private-train"):
            return cmd_train(args, args.command == "private-train")
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "tune":
            return cmd_tune(args)
        return cmd_roc(args)
    except (DVPError, OSError, yaml.YAMLError, ValueError) as exc:
        print(f"dvpadmm {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
