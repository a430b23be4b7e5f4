"""Polar transforms acting on likelihood-ratio distributions.

Images are computed on folded ``(key, side)`` values (see ``channel_model``):

* exact minus  ``(l1 + l2) / (1 + l1 l2)``: key ``(k1 + k2) / (1 + k1 k2)``,
  side ``-side1 * side2`` (same side -> below one)
* min-sum minus: key ``max(k1, k2)`` (the smaller log-LR magnitude), same side rule
* perturbed minus: ``minsum**(1 - gamma) * exact**gamma`` on keys
* plus ``l1 * l2``: keys multiply on equal sides; on opposite sides the weaker
  key divides the stronger one and the stronger side wins

Each kernel therefore obeys the same sign algebra, and an LR equal to one is
produced exactly whenever the rules say it must be.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .channel_model import (
    ChannelError,
    LRDistribution,
    TransitionMatrix,
    from_folded,
    from_pairs,
    round_key,
)

PAIR_CHUNK = 4_000_000


class BudgetInfeasibleError(ChannelError):
    pass


@dataclass(frozen=True)
class KernelId:
    tag: str = "exact"
    gamma: float | None = None

    def __post_init__(self):
        if self.tag not in ("exact", "minsum", "perturbed"):
            raise ValueError(f"unknown kernel {self.tag!r}")
        if self.tag == "perturbed":
            if self.gamma is None or not 0.0 < self.gamma <= 1.0:
                raise ValueError(f"perturbed kernel needs 0 < gamma <= 1, got {self.gamma!r}")
        elif self.gamma is not None:
            raise ValueError("gamma is only meaningful for the perturbed kernel")

    @classmethod
    def parse(cls, text: str) -> "KernelId":
        text = text.strip()
        if text.startswith("perturbed"):
            _, _, g = text.partition(":")
            if not g:
                raise ValueError("use perturbed:<gamma>")
            return cls("perturbed", float(g))
        return cls(text)

    @property
    def is_exact(self) -> bool:
        return self.tag == "exact"

    def __str__(self) -> str:
        return f"perturbed:{self.gamma:g}" if self.tag == "perturbed" else self.tag


EXACT = KernelId("exact")
MINSUM = KernelId("minsum")


@dataclass(frozen=True)
class QuantizationBudget:
    max_atoms: int = 0
    mode: str = "none"

    def __post_init__(self):
        if self.mode not in ("none", "grid"):
            raise ValueError(f"unknown quantization mode {self.mode!r}")
        if self.mode == "grid" and self.max_atoms < 3:
            raise BudgetInfeasibleError(
                f"max_atoms={self.max_atoms} cannot keep the three LR regions apart")

    @classmethod
    def grid(cls, max_atoms: int | None) -> "QuantizationBudget":
        return cls() if not max_atoms else cls(int(max_atoms), "grid")

    @property
    def active(self) -> bool:
        return self.mode == "grid"


NO_BUDGET = QuantizationBudget()


# ---------------------------------------------------------------------------
# image functions on folded values
# ---------------------------------------------------------------------------

def exact_minus_image(k1, g1, k2, g2):
    return (k1 + k2) / (1.0 + k1 * k2), -(g1 * g2)


def minsum_minus_image(k1, g1, k2, g2):
    return np.maximum(k1, k2), -(g1 * g2)


def perturbed_minus_image(k1, g1, k2, g2, gamma):
    exact, g = exact_minus_image(k1, g1, k2, g2)
    approx = np.maximum(k1, k2)
    # 0**0 == 1 keeps gamma == 1 bit-identical to the exact image
    return np.power(approx, 1.0 - gamma) * np.power(exact, gamma), g


def plus_image(k1, g1, k2, g2):
    straddle = (g1 * g2) < 0
    lo, hi = np.minimum(k1, k2), np.maximum(k1, k2)
    ratio = lo / np.where(hi > 0, hi, 1.0)
    k = np.where(straddle, ratio, k1 * k2)
    stronger = np.where(k1 < k2, g1, np.where(k2 < k1, g2, 0))
    g = np.where(straddle, stronger, np.where(g1 != 0, g1, g2)).astype(np.int8)
    return k, g


def minus_image_fn(kernel: KernelId) -> Callable:
    if kernel.tag == "exact":
        return exact_minus_image
    if kernel.tag == "minsum":
        return minsum_minus_image
    gamma = kernel.gamma
    return lambda k1, g1, k2, g2: perturbed_minus_image(k1, g1, k2, g2, gamma)


# ---------------------------------------------------------------------------
# pair enumeration
# ---------------------------------------------------------------------------

def _unordered_pairs(n: int):
    """Yield (i, j) index blocks covering all i <= j, bounded in size."""
    rows_per_block = max(1, PAIR_CHUNK // max(n, 1))
    for start in range(0, n, rows_per_block):
        r = np.arange(start, min(n, start + rows_per_block))
        counts = n - r
        i = np.repeat(r, counts)
        first = np.repeat(np.cumsum(counts) - counts, counts)
        yield i, np.arange(counts.sum()) - first + i


def _reduce(k, g, m):
    """Sum masses over identical rounded (key, side) values."""
    k = round_key(k)
    order = np.lexsort((k, g))
    k, g, m = k[order], g[order], m[order]
    new = np.ones(len(k), dtype=bool)
    new[1:] = (k[1:] != k[:-1]) | (g[1:] != g[:-1])
    starts = np.flatnonzero(new)
    return k[starts], g[starts], np.add.reduceat(m, starts)


def _combine(k, g, m, image):
    """Distribution of image(x1, x2) for x1, x2 i.i.d. over the given atoms."""
    parts = []
    for i, j in _unordered_pairs(len(k)):
        w = m[i] * m[j] * np.where(i == j, 1.0, 2.0)
        kk, gg = image(k[i], g[i], k[j], g[j])
        parts.append((kk, np.asarray(gg, dtype=np.int8), w))
    if len(parts) == 1:
        return parts[0]
    parts = [_reduce(*p) for p in parts]
    return tuple(np.concatenate(x) for x in zip(*parts))


def _general(d: LRDistribution, image, symmetric: bool) -> LRDistribution:
    k, g = d.folded
    kk, gg, w = _combine(k, g, d.mass, image)
    return from_folded(kk, gg, w, symmetric, d.tolerance)


def _pair_domain(d: LRDistribution, image) -> LRDistribution:
    """Symmetric fast path: combine (key, pair mass) components directly.

    A symmetric channel is a mixture of BSCs, one per key; ``image`` maps two
    components to a list of (key, weight fraction) outputs.
    """
    keys, pm = d.pairs
    parts = []
    for i, j in _unordered_pairs(len(keys)):
        w = pm[i] * pm[j] * np.where(i == j, 1.0, 2.0)
        out = image(keys[i], keys[j])
        k = np.concatenate([o[0] for o in out])
        m = np.concatenate([w * o[1] for o in out])
        parts.append((k, np.full(len(k), -1, np.int8), m))
    if len(parts) > 1:
        parts = [_reduce(*p) for p in parts]
    k, _, m = (np.concatenate(x) for x in zip(*parts))
    return from_pairs(k, m, d.tolerance)


def _bsc_minus(ki, kj):
    return [((ki + kj) / (1.0 + ki * kj), 1.0)]


def _bsc_plus(ki, kj):
    pi, pj = ki / (1.0 + ki), kj / (1.0 + kj)
    agree = (1.0 - pi) * (1.0 - pj) + pi * pj
    lo, hi = np.minimum(ki, kj), np.maximum(ki, kj)
    return [(ki * kj, agree), (lo / np.where(hi > 0, hi, 1.0), 1.0 - agree)]


def minus_exact(d: LRDistribution) -> LRDistribution:
    if d.symmetric:
        return _pair_domain(d, _bsc_minus)
    return _general(d, exact_minus_image, symmetric=False)


def plus_exact(d: LRDistribution) -> LRDistribution:
    if d.symmetric:
        return _pair_domain(d, _bsc_plus)
    return _general(d, plus_image, symmetric=False)


def minus_minsum(d: LRDistribution) -> LRDistribution:
    return _general(d, minsum_minus_image, symmetric=False)


def minus_perturbed(d: LRDistribution, gamma: float) -> LRDistribution:
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma!r}")
    if gamma == 1.0:
        return minus_exact(d)
    return _general(d, lambda *a: perturbed_minus_image(*a, gamma), symmetric=False)


def minus(d: LRDistribution, kernel: KernelId = EXACT) -> LRDistribution:
    if kernel.tag == "exact":
        return minus_exact(d)
    if kernel.tag == "minsum":
        return minus_minsum(d)
    return minus_perturbed(d, kernel.gamma)


def plus(d: LRDistribution, kernel: KernelId = EXACT) -> LRDistribution:
    # no approximation of the plus transform exists; every kernel uses the product
    return plus_exact(d)


def general_minus_exact(d: LRDistribution) -> LRDistribution:
    """Full-atom enumeration path; cross-check for the pair-domain fast path."""
    return _general(d, exact_minus_image, d.symmetric)


def general_plus_exact(d: LRDistribution) -> LRDistribution:
    return _general(d, plus_image, d.symmetric)


# ---------------------------------------------------------------------------
# quantization
# ---------------------------------------------------------------------------

def _grid_cells(t: np.ndarray, cells: int) -> np.ndarray:
    lo, hi = t.min(), t.max()
    if hi <= lo:
        return np.zeros(len(t), dtype=np.int64)
    idx = np.floor((t - lo) / (hi - lo) * cells).astype(np.int64)
    return np.clip(idx, 0, cells - 1)


def _merge_side(keys, weights, values, budget_atoms):
    """Grid-merge one side.  Returns (representative keys, merged weights).

    ``values`` is the quantity whose ``weights``-weighted mean becomes the
    cell representative; key 0 keeps its own cell when the budget allows.
    """
    zero = keys == 0.0
    inner = ~zero
    has0 = bool(zero.any())
    cells = budget_atoms - 1 if has0 and budget_atoms >= 2 else budget_atoms
    own0 = has0 and budget_atoms >= 2
    t = -np.log(np.where(inner, keys, 1.0))
    cell = np.empty(len(keys), dtype=np.int64)
    if inner.any():
        cell[inner] = _grid_cells(t[inner], cells)
    # exact zeros: own cell, or the most reliable grid cell when squeezed
    cell[zero] = cells if own0 else cells - 1
    n = cells + 1
    W = np.bincount(cell, weights=weights, minlength=n)
    V = np.bincount(cell, weights=weights * values, minlength=n)
    used = W > 0
    return V[used] / W[used], W[used], used


def quantize_report(d: LRDistribution, budget: QuantizationBudget):
    """Quantize and also return the exact change in (I, Z) caused by the merge."""
    from .metrics import bhattacharyya, sym_capacity

    q = quantize(d, budget)
    if q is d:
        return q, 0.0, 0.0
    return q, abs(sym_capacity(d) - sym_capacity(q)), abs(bhattacharyya(d) - bhattacharyya(q))


def quantize(d: LRDistribution, budget: QuantizationBudget) -> LRDistribution:
    """Reduce ``d`` to at most ``budget.max_atoms`` atoms without crossing LR = 1.

    Merging happens on a uniform grid in |log l|.  Symmetric inputs are merged
    as pairs (equivalently: merged on the l < 1 side and mirrored), with the
    pair's conditional crossover as representative; this keeps P[L<1],
    P[L=1] and P[L>1] unchanged.
    """
    if not budget.active or len(d) <= budget.max_atoms:
        return d
    if budget.max_atoms < 3:
        raise BudgetInfeasibleError("max_atoms must be >= 3")
    k, g = d.folded
    has1 = bool(np.any(g == 0))
    avail = budget.max_atoms - has1

    if d.symmetric:
        keys, pm = d.pairs
        mid = keys < 1.0
        p = keys[mid] / (1.0 + keys[mid])
        # key 0 costs one atom, every other pair two
        has0 = bool(np.any(keys[mid] == 0.0))
        slots = (avail - 1) // 2 + 1 if has0 and avail - 1 >= 2 else avail // 2
        pbar, W, _ = _merge_side(keys[mid], pm[mid], p, slots)
        new_keys = pbar / (1.0 - pbar)
        new_keys = np.concatenate([new_keys, keys[~mid]])
        new_w = np.concatenate([W, pm[~mid]])
        return from_pairs(new_keys, new_w, d.tolerance)

    out_k, out_g, out_m = [k[g == 0]], [g[g == 0]], [d.mass[g == 0]]
    per_side = avail // 2
    for sd in (-1, 1):
        sel = g == sd
        if not sel.any():
            continue
        side_budget = per_side + (avail - 2 * per_side if sd < 0 else 0)
        kbar, W, _ = _merge_side(k[sel], d.mass[sel], k[sel], side_budget)
        out_k.append(kbar)
        out_g.append(np.full(len(kbar), sd, np.int8))
        out_m.append(W)
    return from_folded(np.concatenate(out_k), np.concatenate(out_g), np.concatenate(out_m),
                       False, d.tolerance)


# ---------------------------------------------------------------------------
# brute-force oracle on transition matrices
# ---------------------------------------------------------------------------

def oracle_combine(W: TransitionMatrix, branch: str) -> TransitionMatrix:
    """Combined channel over the product output alphabet, straight from the definition."""
    W.validate()
    r = W.rows
    a0, a1 = r[:, 0][:, None], r[:, 1][:, None]   # y1
    b0, b1 = r[:, 0][None, :], r[:, 1][None, :]   # y2
    if branch == "minus":
        # W-(y1 y2 | u1) = 1/2 sum_u2 W(y1 | u1 ^ u2) W(y2 | u2)
        w0 = 0.5 * (a0 * b0 + a1 * b1)
        w1 = 0.5 * (a1 * b0 + a0 * b1)
        rows = np.stack([w0.ravel(), w1.ravel()], axis=1)
    elif branch == "plus":
        # W+(y1 y2 u1 | u2) = 1/2 W(y1 | u1 ^ u2) W(y2 | u2)
        blocks = []
        for u1 in (0, 1):
            x_u2_0 = a1 if u1 else a0
            x_u2_1 = a0 if u1 else a1
            w0 = 0.5 * x_u2_0 * b0
            w1 = 0.5 * x_u2_1 * b1
            blocks.append(np.stack([w0.ravel(), w1.ravel()], axis=1))
        rows = np.concatenate(blocks)
    else:
        raise ValueError(f"branch must be 'minus' or 'plus', got {branch!r}")
    # products of zero-probability pairs are dropped; they carry no mass
    rows = rows[(rows[:, 0] > 0) | (rows[:, 1] > 0)]
    return TransitionMatrix(rows, W.tolerance)
