"""Final empirical risk against the number of vehicles at fixed alpha."""
import argparse
import dataclasses

from dvpadmm.harness import load_config, pooled_std, run_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default="configs/dvp.yaml")
    ap.add_argument("--sizes", type=int, nargs="+", default=[4, 8, 16])
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--out", default="runs/size")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    base = load_config(args.config)
    base = dataclasses.replace(base, topology=dataclasses.replace(base.topology, kind="random"),
                               data=dataclasses.replace(base.data, n_per_node=1000))
    er = {}
    for P in args.sizes:
        cfg = dataclasses.replace(base, nodes=P, alpha=args.alpha, out_dir=f"{args.out}/P{P}")
        er[P] = run_experiment(cfg, jobs=args.jobs).values("final_er")
        print(f"P={P:3d}  ER={er[P].mean():.3f} +- {er[P].std(ddof=1):.3f}")
    print(f"pooled std {pooled_std(*er.values()):.3f}")


if __name__ == "__main__":
    main()
