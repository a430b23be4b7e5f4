"""Trapped and mismatched mass per level for the min-sum (or perturbed) process.

    python3 scripts/trapped_mass.py --channel '{"type": "bsc", "p": 0.11}' --depth 8 --kernel minsum
"""
import argparse

from polarlr import KernelId, QuantizationBudget, build_channel, trapped_mass_trajectory


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--channel", default='{"type": "bsc", "p": 0.11}')
    ap.add_argument("--depth", type=int, default=8)
    ap.add_argument("--kernel", default="minsum")
    ap.add_argument("--max-atoms", type=int, default=128)
    args = ap.parse_args()

    traj = trapped_mass_trajectory(build_channel(args.channel), args.depth, KernelId.parse(args.kernel),
                                   QuantizationBudget.grid(args.max_atoms))
    print("level  max_trapped  mean_trapped  max_mismatch")
    for lvl, (a, b, c) in enumerate(zip(traj.max_trapped, traj.mean_trapped, traj.max_mismatch)):
        print(f"{lvl:<6} {a:11.3e} {b:13.3e} {c:13.3e}")


if __name__ == "__main__":
    main()
