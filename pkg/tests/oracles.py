"""Independent reference computations used by the tests.

Nothing here calls into the package's transforms or metrics: values come from
closed forms or direct sums over transition matrices.
"""
from __future__ import annotations

import math

import numpy as np

# closed forms, evaluated at 30 digits with mpmath and frozen
BSC_011_A = 0.123595505617977528089887640449          # p / (1 - p), p = 0.11
BSC_011_MINUS_LO = 0.243471773190748570007460830639   # 2a / (1 + a^2)
BSC_011_MINUS_HI = 4.10725229826353421859039836568    # (a + 1/a) / 2
BSC_011_PERTURBED_05 = 0.17347050732391404231400628031  # sqrt(a * 2a / (1 + a^2))
BSC_011_PLUS_LO = 0.0152758490089635147077389218533   # a^2
BSC_011_PLUS_HI = 65.462809917355371900826446281      # 1 / a^2
BSC_011_Z = 0.625779513886480627094412483416          # 2 sqrt(p (1 - p))
BSC_011_I = 0.50008404183547200435950040587           # 1 - h2(0.11)
AWGN_097865_I = 0.50002960330638004235183282503       # quadrature of the BI-AWGN capacity integral


def h2(p: float) -> float:
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def capacity_double_sum(rows) -> float:
    """I(W) = sum_x sum_y 1/2 W(y|x) log2(W(y|x) / (W(y|0)/2 + W(y|1)/2))."""
    total = 0.0
    for w0, w1 in rows:
        avg = 0.5 * (w0 + w1)
        for w in (w0, w1):
            if w > 0:
                total += 0.5 * w * math.log2(w / avg)
    return total


def random_symmetric_rows(rng: np.random.Generator, max_outputs: int = 6) -> np.ndarray:
    """Random symmetric transition matrix with at most ``max_outputs`` rows.

    Rows come in swapped pairs (a, b), (b, a) plus optional self-symmetric
    rows (t, t); this is the definition of a symmetric B-DMC, not a rendering
    of an LR distribution.
    """
    n_self = int(rng.integers(0, 3))
    n_pairs = int(rng.integers(1 if n_self == 0 else 0, (max_outputs - n_self) // 2 + 1))
    rows = []
    for _ in range(n_pairs):
        a, b = rng.random(2)
        if rng.random() < 0.15:
            b = 0.0  # an output that is impossible under input 1
        rows += [(a, b), (b, a)]
    for _ in range(n_self):
        t = rng.random()
        rows.append((t, t))
    rows = np.array(rows, dtype=float)
    if rows[:, 0].sum() == 0:
        rows = np.array([[0.5, 0.5]])
    return rows / rows[:, 0].sum()


def oriented(rows: np.ndarray) -> np.ndarray:
    """Relabel the inputs, if needed, so that P[L > 1] <= P[L < 1]."""
    w0, w1 = rows[:, 0], rows[:, 1]
    if w0[w1 > w0].sum() > w0[w1 < w0].sum():
        return rows[:, ::-1].copy()
    return rows


def bec_q_path(eps: float, bits) -> list[float]:
    """Q along a path for a BEC: Q- = Q^2, Q+ = 2Q - Q^2 (Q = 1 - erasure probability)."""
    q = 1.0 - eps
    out = [q]
    for b in bits:
        q = 2 * q - q * q if b else q * q
        out.append(q)
    return out
