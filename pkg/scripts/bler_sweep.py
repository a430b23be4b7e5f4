"""BLER of SC decoding against the construction union bound over a range of BEC erasures.

The code is built once at ``--design-eps`` and decoded on each channel.

    python3 scripts/bler_sweep.py --depth 8 --rate 0.375 --trials 2000
"""
import argparse

import numpy as np

from polarlr import KernelId, evolve_tree, make_bec, run_bler, select_frozen


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--depth", type=int, default=8)
    ap.add_argument("--rate", type=float, default=0.375)
    ap.add_argument("--design-eps", type=float, default=0.4)
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--kernel", default="exact")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    k = int(round(args.rate * 2 ** args.depth))
    code = select_frozen(evolve_tree(make_bec(args.design_eps), args.depth), k)
    kernel = KernelId.parse(args.kernel)
    print(f"N={code.block_length} k={k} design union bound {code.union_bound:.3e}")
    print("eps    union_bound  bler")
    for eps in np.round(np.arange(0.25, 0.50, 0.05), 2):
        recs = evolve_tree(make_bec(float(eps)), args.depth)
        ub = sum(recs[i].metrics.pe for i in code.info_set)
        stats = run_bler(code, {"type": "bec", "eps": float(eps)}, args.trials, kernel, args.seed, threads=4)
        print(f"{eps:<6} {ub:11.3e}  {stats.bler:.4f}")


if __name__ == "__main__":
    main()
