"""Scalar channel parameters computed from an LR distribution."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .channel_model import LRDistribution, TransitionMatrix

LN2 = np.log(2.0)


@dataclass(frozen=True)
class ChannelMetrics:
    i: float
    z: float
    q: float
    p_less: float
    p_eq: float
    p_greater: float
    p_geq_half: float
    p_leq_half: float
    pe: float

    def to_json(self) -> dict:
        return {k: float(v) for k, v in asdict(self).items()}


@dataclass(frozen=True)
class Partition:
    p_less: float
    p_eq: float
    p_greater: float
    p_geq_half: float
    p_leq_half: float

    def __iter__(self):
        return iter((self.p_less, self.p_eq, self.p_greater, self.p_geq_half, self.p_leq_half))

    @property
    def p_geq(self) -> float:
        return self.p_eq + self.p_greater


def prob_partition(d: LRDistribution) -> Partition:
    """Region masses P[L<1], P[L=1], P[L>1] and the half-split P[L⪈1], P[L⪅1]."""
    _, side = d.folded
    less = float(d.mass[side < 0].sum())
    eq = float(d.mass[side == 0].sum())
    greater = float(d.mass[side > 0].sum())
    return Partition(less, eq, greater, greater + 0.5 * eq, less + 0.5 * eq)


def q_param(d: LRDistribution) -> float:
    part = prob_partition(d)
    return part.p_less - part.p_greater


def bhattacharyya(d: LRDistribution) -> float:
    return float(np.sum(d.mass * np.sqrt(d.lr)))


def sym_capacity(d: LRDistribution) -> float:
    """I(W) in bits, via sum_l P[L=l] (1 - log2(1 + l))."""
    return float(np.sum(d.mass * (1.0 - np.log1p(d.lr) / LN2)))


def sym_capacity_direct(W: TransitionMatrix) -> float:
    """I(W) straight from the transition probabilities (double sum over x, y)."""
    r = W.rows
    avg = 0.5 * (r[:, 0] + r[:, 1])
    total = 0.0
    for x in (0, 1):
        w = r[:, x]
        live = w > 0
        total += 0.5 * np.sum(w[live] * np.log2(w[live] / avg[live]))
    return float(total)


def channel_metrics(d: LRDistribution) -> ChannelMetrics:
    part = prob_partition(d)
    return ChannelMetrics(
        i=sym_capacity(d),
        z=bhattacharyya(d),
        q=part.p_less - part.p_greater,
        p_less=part.p_less,
        p_eq=part.p_eq,
        p_greater=part.p_greater,
        p_geq_half=part.p_geq_half,
        p_leq_half=part.p_leq_half,
        pe=part.p_geq_half,
    )


def classify_limit(d: LRDistribution, delta: float) -> str:
    """Place a channel in the (Q, P[L=1]) case table: perfect, noisy, moderate or undecided."""
    if not 0.0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 0.5)")
    part = prob_partition(d)
    q = part.p_less - part.p_greater
    if q >= 1.0 - delta:
        return "perfect"
    if part.p_eq >= 1.0 - delta:
        return "noisy"
    if q <= delta and part.p_eq <= delta:
        return "moderate"
    return "undecided"
