"""Fraction of good leaves versus depth for BSC(p) and the matching BEC.

For the BEC the leaf erasure probabilities are exact, so the BEC column shows
how deep the tree must be before the fraction of leaves with pe < threshold
gets close to the capacity.

    python3 scripts/polarization_fraction.py --p 0.11 --max-depth 12 --max-atoms 256
"""
import argparse

import numpy as np

from polarlr import QuantizationBudget, evolve_tree, make_bec, make_bsc, sym_capacity


def bec_fraction(eps: float, n: int, threshold: float) -> float:
    z = np.array([eps])
    for _ in range(n):
        z = np.stack([2 * z - z * z, z * z], axis=1).ravel()
    return float(np.mean(z / 2 < threshold))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, default=0.11)
    ap.add_argument("--max-depth", type=int, default=10)
    ap.add_argument("--max-atoms", type=int, default=256)
    ap.add_argument("--threshold", type=float, default=1e-3)
    args = ap.parse_args()

    root = make_bsc(args.p)
    cap = sym_capacity(root)
    eps = 1 - cap
    print(f"I(BSC({args.p})) = {cap:.6f}; reference BEC erasure {eps:.6f}")
    print("n  bsc_fraction  bec_fraction  mean_Q(1-Q)")
    budget = QuantizationBudget.grid(args.max_atoms)
    for n in range(args.max_depth + 1):
        recs = evolve_tree(root, n, budget=budget)
        frac = np.mean([r.metrics.pe < args.threshold for r in recs])
        q = np.array([r.metrics.q for r in recs])
        print(f"{n:<2} {frac:12.4f} {bec_fraction(eps, n, args.threshold):13.4f} {np.mean(q * (1 - q)):12.5f}")


if __name__ == "__main__":
    main()
