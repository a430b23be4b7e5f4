"""Evolution of a root channel through the polarization tree.

Leaves are ordered breadth-first with minus = 0, plus = 1 and the first
transform as the most significant bit, so leaf ``i`` is the synthetic channel
whose path is the binary expansion of ``i``.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Sequence

import numpy as np

from .channel_model import LRDistribution, require_standing_assumption
from .metrics import ChannelMetrics, channel_metrics, prob_partition
from .transforms import EXACT, NO_BUDGET, KernelId, QuantizationBudget, minus, plus, quantize

MARGIN_TOL = 1e-10
IDENTITY_TOL = 1e-12


@dataclass(frozen=True)
class PathIndex:
    bits: tuple[int, ...] = ()

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"path bits must be 0 (minus) or 1 (plus): {self.bits!r}")

    @property
    def depth(self) -> int:
        return len(self.bits)

    @property
    def index(self) -> int:
        i = 0
        for b in self.bits:
            i = 2 * i + b
        return i

    @classmethod
    def from_index(cls, index: int, depth: int) -> "PathIndex":
        if not 0 <= index < (1 << depth) and not (depth == 0 and index == 0):
            raise ValueError(f"index {index} out of range for depth {depth}")
        return cls(tuple((index >> (depth - 1 - t)) & 1 for t in range(depth)))

    def child(self, bit: int) -> "PathIndex":
        return PathIndex(self.bits + (bit,))

    @property
    def label(self) -> str:
        return "".join("-+"[b] for b in self.bits)

    @property
    def bit_string(self) -> str:
        return "".join(str(b) for b in self.bits)


@dataclass(frozen=True)
class SyntheticChannelRecord:
    path: PathIndex
    metrics: ChannelMetrics
    atom_count: int
    quantized: bool = False


# ---------------------------------------------------------------------------
# level-by-level evolution
# ---------------------------------------------------------------------------

def default_threads() -> int:
    return os.cpu_count() or 1


def _ordered_map(fn: Callable, items: Sequence, threads: int | None):
    threads = default_threads() if threads is None else threads
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        # map keeps input order, so the collector is path-ordered whatever the timing
        return list(pool.map(fn, items))


def iter_levels(root, depth: int, step: Callable, threads: int | None = None) -> Iterator[list]:
    """Yield the node list of every level 0..depth.

    ``step`` maps a node to its (minus child, plus child); nodes at each level
    come out in path-index order.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    level = [root]
    yield level
    for _ in range(depth):
        children = _ordered_map(step, level, threads)
        level = [c for pair in children for c in pair]
        yield level


@dataclass(frozen=True)
class _Node:
    dist: LRDistribution
    quantized: bool = False


def _stepper(kernel: KernelId, budget: QuantizationBudget):
    def step(node: _Node):
        out = []
        for child in (minus(node.dist, kernel), plus(node.dist, kernel)):
            q = quantize(child, budget)
            out.append(_Node(q, node.quantized or q is not child))
        return tuple(out)
    return step


def evolve_levels(root: LRDistribution, depth: int, kernel: KernelId = EXACT,
                  budget: QuantizationBudget = NO_BUDGET,
                  threads: int | None = None) -> Iterator[tuple[int, list[LRDistribution], list[bool]]]:
    """Yield (level, distributions, quantized flags) for levels 0..depth."""
    require_standing_assumption(root)
    for lvl, nodes in enumerate(iter_levels(_Node(root), depth, _stepper(kernel, budget), threads)):
        yield lvl, [n.dist for n in nodes], [n.quantized for n in nodes]


def evolve_tree(root: LRDistribution, depth: int, kernel: KernelId = EXACT,
                budget: QuantizationBudget = NO_BUDGET, threads: int | None = None,
                on_internal: Callable[[PathIndex, LRDistribution], None] | None = None,
                ) -> list[SyntheticChannelRecord]:
    """All 2**depth leaf records in index order.

    Internal nodes (root included) are handed to ``on_internal`` level by level,
    in path order, before their children are computed further down.
    """
    for lvl, dists, flags in evolve_levels(root, depth, kernel, budget, threads):
        if lvl < depth:
            if on_internal is not None:
                for i, d in enumerate(dists):
                    on_internal(PathIndex.from_index(i, lvl), d)
            continue
        return [
            SyntheticChannelRecord(PathIndex.from_index(i, depth), channel_metrics(d), len(d), f)
            for i, (d, f) in enumerate(zip(dists, flags))
        ]
    raise AssertionError("unreachable")


def sample_path(root: LRDistribution, depth: int, kernel: KernelId = EXACT,
                budget: QuantizationBudget = NO_BUDGET,
                seed: int = 0) -> list[tuple[PathIndex, ChannelMetrics]]:
    """One uniformly random root-to-leaf trajectory with metrics at every level."""
    require_standing_assumption(root)
    bits = np.random.default_rng(seed).integers(0, 2, size=depth)
    path, d = PathIndex(), root
    out = [(path, channel_metrics(d))]
    for b in bits:
        b = int(b)
        d = quantize(plus(d, kernel) if b else minus(d, kernel), budget)
        path = path.child(b)
        out.append((path, channel_metrics(d)))
    return out


# ---------------------------------------------------------------------------
# one-step proposition checks
# ---------------------------------------------------------------------------

@dataclass
class PropositionReport:
    prop1_ok: bool
    prop2_ok: bool
    prop3_ok: bool
    prop4_ok: bool
    worst_margin: dict[str, float]
    details: list[dict] = field(default_factory=list)
    identities: dict[str, float] = field(default_factory=dict)
    identities_ok: bool = True
    kernel: str = "exact"

    @property
    def ok(self) -> bool:
        return self.prop1_ok and self.prop2_ok and self.prop3_ok and self.prop4_ok and self.identities_ok

    def to_json(self) -> dict:
        return {
            "kernel": self.kernel,
            "prop1_ok": self.prop1_ok,
            "prop2_ok": self.prop2_ok,
            "prop3_ok": self.prop3_ok,
            "prop4_ok": self.prop4_ok,
            "identities_ok": self.identities_ok,
            "worst_margin": dict(self.worst_margin),
            "identities": dict(self.identities),
            "details": list(self.details),
        }


def _margins(parent, m, p) -> dict[str, list[tuple[str, float]]]:
    """Signed slack of every inequality; nonnegative means satisfied."""
    q, qm, qp = (x.p_less - x.p_greater for x in (parent, m, p))
    return {
        "prop1": [
            ("P[L+ >~ 1] <= P[L >~ 1]", parent.p_geq_half - p.p_geq_half),
            ("P[L >~ 1] <= P[L- >~ 1]", m.p_geq_half - parent.p_geq_half),
            ("P[L- <~ 1] <= P[L <~ 1]", parent.p_leq_half - m.p_leq_half),
            ("P[L <~ 1] <= P[L+ <~ 1]", p.p_leq_half - parent.p_leq_half),
        ],
        "prop2": [
            ("P[L- > 1] <= P[L- < 1]", m.p_less - m.p_greater),
            ("P[L+ > 1] <= P[L+ < 1]", p.p_less - p.p_greater),
        ],
        "prop3": [
            ("P[L- >~ 1] + P[L+ >~ 1] >= 2 P[L >~ 1]", m.p_geq_half + p.p_geq_half - 2 * parent.p_geq_half),
            ("P[L- <~ 1] + P[L+ <~ 1] <= 2 P[L <~ 1]", 2 * parent.p_leq_half - m.p_leq_half - p.p_leq_half),
            ("P[L- = 1] + P[L+ = 1] >= 2 P[L = 1]", m.p_eq + p.p_eq - 2 * parent.p_eq),
            ("P[L- < 1] + P[L+ < 1] <= 2 P[L < 1]", 2 * parent.p_less - m.p_less - p.p_less),
            ("P[L- >= 1] + P[L+ >= 1] >= 2 P[L >= 1]", m.p_geq + p.p_geq - 2 * parent.p_geq),
        ],
        "prop4": [
            ("Q- = Q^2", -abs(qm - q * q)),
            ("Q <= Q+", qp - q),
            ("Q+ <= 2Q - Q^2", 2 * q - q * q - qp),
        ],
    }


def minus_identity_residuals(parent, m) -> dict[str, float]:
    """Residuals of the closed forms for the minus child's region masses."""
    e = parent.p_eq
    return {
        "P[L- >~ 1] = 2 P[<~] P[>~]": abs(m.p_geq_half - 2 * parent.p_leq_half * parent.p_geq_half),
        "P[L- <~ 1] = P[<~]^2 + P[>~]^2": abs(m.p_leq_half - parent.p_leq_half ** 2 - parent.p_geq_half ** 2),
        "P[L- = 1] = 2 P[=1] - P[=1]^2": abs(m.p_eq - (2 * e - e * e)),
    }


def verify_propositions(parent: LRDistribution, kernel: KernelId = EXACT) -> PropositionReport:
    """Check the one-step inequalities on both children of ``parent``."""
    require_standing_assumption(parent)
    m_dist, p_dist = minus(parent, kernel), plus(parent, kernel)
    pp, mp, plp = prob_partition(parent), prob_partition(m_dist), prob_partition(p_dist)

    margins = _margins(pp, mp, plp)
    worst = {name: min(v for _, v in items) for name, items in margins.items()}
    details = [
        {"proposition": name, "inequality": text, "margin": v}
        for name, items in margins.items() for text, v in items if v < -MARGIN_TOL
    ]
    q = pp.p_less - pp.p_greater
    q_sq_ok = abs((mp.p_less - mp.p_greater) - q * q) <= IDENTITY_TOL
    if not q_sq_ok and not any(d["inequality"] == "Q- = Q^2" for d in details):
        details.append({"proposition": "prop4", "inequality": "Q- = Q^2", "margin": margins["prop4"][0][1]})

    ident = minus_identity_residuals(pp, mp)
    ident_ok = max(ident.values()) <= IDENTITY_TOL
    if not ident_ok:
        details += [{"proposition": "identity", "inequality": k, "margin": -v}
                    for k, v in ident.items() if v > IDENTITY_TOL]
    return PropositionReport(
        prop1_ok=worst["prop1"] >= -MARGIN_TOL,
        prop2_ok=worst["prop2"] >= -MARGIN_TOL,
        prop3_ok=worst["prop3"] >= -MARGIN_TOL,
        prop4_ok=worst["prop4"] >= -MARGIN_TOL and q_sq_ok,
        worst_margin=worst,
        details=details,
        identities=ident,
        identities_ok=ident_ok,
        kernel=str(kernel),
    )


# ---------------------------------------------------------------------------
# level aggregates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LevelAggregate:
    level: int
    mean_q: float
    mean_p_geq_half: float
    mean_p_leq_half: float
    mean_p_eq: float
    mean_i: float
    mean_z: float
    mean_q_spread: float          # E[Q (1 - Q)]
    mean_abs_q_step: float | None  # E|Q_{k+1} - Q_k|, None at the last level


@dataclass
class MartingaleReport:
    levels: list[LevelAggregate]
    q_nonincreasing: bool
    p_geq_half_nondecreasing: bool
    p_eq_nondecreasing: bool
    p_leq_half_nonincreasing: bool
    capacity_drift: float

    def capacity_constant(self, tol: float = 1e-9) -> bool:
        return self.capacity_drift <= tol

    @property
    def ok(self) -> bool:
        return (self.q_nonincreasing and self.p_geq_half_nondecreasing
                and self.p_eq_nondecreasing and self.p_leq_half_nonincreasing)


def _monotone(xs, sign, tol=MARGIN_TOL) -> bool:
    d = sign * np.diff(np.asarray(xs, dtype=float))
    return bool(np.all(d >= -tol))


def martingale_report(root: LRDistribution, depth: int, kernel: KernelId = EXACT,
                      budget: QuantizationBudget = NO_BUDGET,
                      threads: int | None = None) -> MartingaleReport:
    """Level means of the tracked processes and their expected monotonicity."""
    rows = []
    prev_q = None
    for lvl, dists, _ in evolve_levels(root, depth, kernel, budget, threads):
        mets = [channel_metrics(d) for d in dists]
        q = np.array([m.q for m in mets])
        if prev_q is not None:
            # each parent has two children at positions 2j, 2j+1
            step = np.mean(np.abs(q - np.repeat(prev_q, 2)))
            rows[-1] = replace(rows[-1], mean_abs_q_step=float(step))
        rows.append(LevelAggregate(
            level=lvl,
            mean_q=float(q.mean()),
            mean_p_geq_half=float(np.mean([m.p_geq_half for m in mets])),
            mean_p_leq_half=float(np.mean([m.p_leq_half for m in mets])),
            mean_p_eq=float(np.mean([m.p_eq for m in mets])),
            mean_i=float(np.mean([m.i for m in mets])),
            mean_z=float(np.mean([m.z for m in mets])),
            mean_q_spread=float(np.mean(q * (1 - q))),
            mean_abs_q_step=None,
        ))
        prev_q = q
    mean_i = [r.mean_i for r in rows]
    return MartingaleReport(
        levels=rows,
        q_nonincreasing=_monotone([r.mean_q for r in rows], -1),
        p_geq_half_nondecreasing=_monotone([r.mean_p_geq_half for r in rows], +1),
        p_eq_nondecreasing=_monotone([r.mean_p_eq for r in rows], +1),
        p_leq_half_nonincreasing=_monotone([r.mean_p_leq_half for r in rows], -1),
        capacity_drift=float(max(abs(x - mean_i[0]) for x in mean_i)),
    )
