"""Security/privacy tradeoff: alpha sweep, non-private reference, fitted curve and alpha*.

    python3 scripts/tradeoff.py --config configs/dvp.yaml --baseline configs/baseline.yaml --out runs/tradeoff
"""
import argparse
import dataclasses
import json
from pathlib import Path

from dvpadmm.harness import load_config, run_experiment, sweep_alpha
from dvpadmm.tuning import PrivacyUtility, tune


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default="configs/dvp.yaml")
    ap.add_argument("--baseline", default="configs/baseline.yaml")
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.01, 0.05, 0.1, 0.2, 0.5, 1.0])
    ap.add_argument("--out", default="runs/tradeoff")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--U1", type=float)
    args = ap.parse_args()

    out = Path(args.out)
    cfg = dataclasses.replace(load_config(args.config), out_dir=str(out / "sweep"))
    rows = sweep_alpha(cfg, args.alphas, jobs=args.jobs)
    base = dataclasses.replace(load_config(args.baseline), out_dir=str(out / "baseline"))
    ref = run_experiment(base, jobs=args.jobs).aggregate

    print(f"{'alpha':>8} {'ER':>10} {'loss/C1':>9} {'AUC':>7}")
    for r in rows:
        print(f"{r['alpha']:8g} {r['mean_final_er']:10.3f} {r['mean_final_loss']:9.4f} {r['mean_auc']:7.4f}")
    print(f"{'np':>8} {ref['final_er']['mean']:10.3f} {ref['final_mean_loss']['mean']:9.4f} "
          f"{ref['auc']['mean']:7.4f}")

    # the curve is fitted on risk per unit of C1 so its scale is comparable across C1 settings
    res = tune([(r["alpha"], r["mean_final_loss"]) for r in rows], PrivacyUtility(), args.U1)
    (out / "tune.json").write_text(json.dumps(res.to_dict(), indent=2))
    c = res.curve
    print(f"fit: C5={c.c5:.4g} C6={c.c6:.4g} C7={c.c7:.4g}  alpha*={res.alpha_star:.4f}")


if __name__ == "__main__":
    main()
