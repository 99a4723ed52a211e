"""Runs with 1, 3 and 5 topology phases over the same 45 rounds."""
import argparse
import dataclasses

from dvpadmm.harness import ScheduleCfg, load_config, pooled_std, run_experiment

SCHEDULES = {
    1: ([45], [8]),
    3: ([25, 15, 5], [8, 6, 8]),
    5: ([15, 10, 10, 5, 5], [8, 6, 8, 7, 8]),
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default="configs/topology_varying.yaml")
    ap.add_argument("--out", default="runs/topology")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    base = load_config(args.config)
    er = {}
    for vt, (k, p) in SCHEDULES.items():
        cfg = dataclasses.replace(base, nodes=max(p), schedule=ScheduleCfg(k, p), out_dir=f"{args.out}/VT{vt}")
        res = run_experiment(cfg.validate(), jobs=args.jobs)
        er[vt] = res.values("final_er")
        print(f"VT={vt}  k={k}  P={p}  ER={er[vt].mean():.3f} +- {er[vt].std(ddof=1):.3f}")
    print(f"pooled std {pooled_std(*er.values()):.3f}")


if __name__ == "__main__":
    main()
