"""Histogram ratio of one private round on two neighbouring datasets."""
import argparse
import math

from dvpadmm.dataset import NodeDataset, synthesize
from dvpadmm.dvp import ddp_ratio_check


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.1, 0.5, 1.0])
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    d = synthesize(args.n, 2, 2.0, args.seed)
    X2, y2 = d.X.copy(), d.y.copy()
    X2[0], y2[0] = -0.5 * X2[0], -y2[0]
    other = NodeDataset(X2, y2)
    for a in args.alphas:
        r = ddp_ratio_check(d, other, a, trials=args.trials, seed=args.seed)
        print(f"alpha={a:g}  max ratio={r:.3f}  e^alpha={math.exp(a):.3f}")


if __name__ == "__main__":
    main()
