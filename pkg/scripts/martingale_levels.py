"""Level means of Q, P[L=1], I and E[Q(1-Q)] down the polarization tree.

    python3 scripts/martingale_levels.py --channel '{"type": "bsc", "p": 0.11}' --depth 8
"""
import argparse

from polarlr import KernelId, QuantizationBudget, build_channel, martingale_report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--channel", default='{"type": "bsc", "p": 0.11}')
    ap.add_argument("--depth", type=int, default=8)
    ap.add_argument("--kernel", default="exact")
    ap.add_argument("--max-atoms", type=int, default=128)
    args = ap.parse_args()

    rep = martingale_report(build_channel(args.channel), args.depth, KernelId.parse(args.kernel),
                            QuantizationBudget.grid(args.max_atoms))
    print("level  E[Q]      E[P=1]    E[I]      E[Q(1-Q)]  E|dQ|")
    for lv in rep.levels:
        step = "" if lv.mean_abs_q_step is None else f"{lv.mean_abs_q_step:.5f}"
        print(f"{lv.level:<6} {lv.mean_q:.6f}  {lv.mean_p_eq:.6f}  {lv.mean_i:.6f}  {lv.mean_q_spread:.6f}   {step}")
    print(f"monotone: {rep.ok}; capacity drift {rep.capacity_drift:.2e}")


if __name__ == "__main__":
    main()
