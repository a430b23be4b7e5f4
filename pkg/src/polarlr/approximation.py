"""Joint evolution of the exact and approximate LR processes on the same outputs.

A joint atom carries the exact LR, the approximate LR and their common mass.
Both coordinates are stored folded as (key, side) like everywhere else, so
the region of a coordinate (<1, =1, >1) is simply its side.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel_model import (
    PRUNE_FLOOR,
    ConsistencyError,
    LRDistribution,
    _renormalize,
    _tidy_keys,
    from_folded,
    require_standing_assumption,
    unfold,
)
from .engine import PathIndex, iter_levels
from .metrics import prob_partition
from .transforms import (
    NO_BUDGET,
    KernelId,
    QuantizationBudget,
    _grid_cells,
    _unordered_pairs,
    exact_minus_image,
    minus_image_fn,
    plus_image,
)

REGIONS = ("<1", "=1", ">1")


@dataclass(frozen=True, eq=False)
class JointLRDistribution:
    """Folded joint atoms: (ke, ge) exact, (ka, ga) approximate, mass m."""
    ke: np.ndarray
    ge: np.ndarray
    ka: np.ndarray
    ga: np.ndarray
    mass: np.ndarray
    quantized: bool = False

    def __len__(self) -> int:
        return len(self.mass)

    @property
    def lr_exact(self) -> np.ndarray:
        return unfold(self.ke, self.ge)

    @property
    def lr_approx(self) -> np.ndarray:
        return unfold(self.ka, self.ga)

    @property
    def atoms(self) -> list[tuple[float, float, float]]:
        return list(zip(self.lr_exact.tolist(), self.lr_approx.tolist(), self.mass.tolist()))


def _fold_any(lr):
    lr = np.asarray(lr, dtype=np.float64)
    upper = lr > 1.0
    s = np.where(upper, 1.0 / np.where(upper, lr, 1.0), lr)
    return s, np.where(upper, 1, -1).astype(np.int8)


def _canonical_joint(ke, ge, ka, ga, m, quantized=False) -> JointLRDistribution:
    ke, ge = _tidy_keys(ke, ge, symmetric=False)
    ka, ga = _tidy_keys(ka, ga, symmetric=False)
    m = np.asarray(m, dtype=np.float64)
    order = np.lexsort((ka, ga, ke, ge))
    ke, ge, ka, ga, m = ke[order], ge[order], ka[order], ga[order], m[order]
    new = np.ones(len(m), dtype=bool)
    new[1:] = (ke[1:] != ke[:-1]) | (ge[1:] != ge[:-1]) | (ka[1:] != ka[:-1]) | (ga[1:] != ga[:-1])
    starts = np.flatnonzero(new)
    m = np.add.reduceat(m, starts) if len(m) else m
    ke, ge, ka, ga = ke[starts], ge[starts], ka[starts], ga[starts]
    keep = m >= PRUNE_FLOOR
    pruned = not bool(keep.all())
    m = _renormalize(m[keep], pruned)
    return JointLRDistribution(ke[keep], ge[keep], ka[keep], ga[keep], m, quantized)


def joint_from_atoms(atoms) -> JointLRDistribution:
    """Build from (lr_exact, lr_approx, mass) triples."""
    arr = np.asarray(list(atoms), dtype=np.float64).reshape(-1, 3)
    if np.any(arr[:, :2] < 0) or not np.all(np.isfinite(arr)):
        raise ConsistencyError("joint LR values must be finite and nonnegative")
    if abs(arr[:, 2].sum() - 1.0) > 1e-12 or np.any(arr[:, 2] < 0):
        raise ConsistencyError("joint masses must be nonnegative and sum to 1")
    ke, ge = _fold_any(arr[:, 0])
    ka, ga = _fold_any(arr[:, 1])
    return _canonical_joint(ke, ge, ka, ga, arr[:, 2])


def lift(d: LRDistribution) -> JointLRDistribution:
    """Diagonal embedding: before any approximate step both processes agree."""
    k, g = d.folded
    return JointLRDistribution(k.copy(), g.copy(), k.copy(), g.copy(), d.mass.copy())


def joint_step(j: JointLRDistribution, branch: str, approx: KernelId) -> JointLRDistribution:
    """One transform on both coordinates over independent pairs of joint atoms."""
    if branch == "minus":
        img_e, img_a = exact_minus_image, minus_image_fn(approx)
    elif branch == "plus":
        img_e = img_a = plus_image
    else:
        raise ValueError(f"branch must be 'minus' or 'plus', got {branch!r}")
    parts = []
    for a, b in _unordered_pairs(len(j)):
        w = j.mass[a] * j.mass[b] * np.where(a == b, 1.0, 2.0)
        ke, ge = img_e(j.ke[a], j.ge[a], j.ke[b], j.ge[b])
        ka, ga = img_a(j.ka[a], j.ga[a], j.ka[b], j.ga[b])
        parts.append((ke, np.asarray(ge, np.int8), ka, np.asarray(ga, np.int8), w))
    cat = [np.concatenate(x) for x in zip(*parts)]
    return _canonical_joint(*cat, quantized=j.quantized)


def exact_marginal(j: JointLRDistribution) -> LRDistribution:
    return from_folded(j.ke, j.ge, j.mass, symmetric=True)


def approx_marginal(j: JointLRDistribution, symmetric: bool = False) -> LRDistribution:
    return from_folded(j.ka, j.ga, j.mass, symmetric=symmetric)


def quantize_joint(j: JointLRDistribution, budget: QuantizationBudget) -> JointLRDistribution:
    """Grid-merge on the exact coordinate inside each (exact region, approx region) cell.

    The approximate coordinate is carried as a mass-weighted representative,
    so the 3x3 region matrix (hence trapped and mismatch mass) is unchanged.
    """
    if not budget.active or len(j) <= budget.max_atoms:
        return j
    groups = [(ge, ga) for ge in (-1, 0, 1) for ga in (-1, 0, 1)
              if np.any((j.ge == ge) & (j.ga == ga))]
    cells = max(1, budget.max_atoms // len(groups))
    out = []
    for ge, ga in groups:
        sel = (j.ge == ge) & (j.ga == ga)
        ke, ka, m = j.ke[sel], j.ka[sel], j.mass[sel]
        zero = ke == 0.0
        cell = np.full(len(m), cells, dtype=np.int64)  # exact zeros get their own cell
        if (~zero).any():
            cell[~zero] = _grid_cells(-np.log(ke[~zero]), max(1, cells - int(zero.any())))
        W = np.bincount(cell, weights=m)
        used = W > 0
        rep_e = np.bincount(cell, weights=m * ke)[used] / W[used]
        rep_a = np.bincount(cell, weights=m * ka)[used] / W[used]
        if ge == 0:
            rep_e[:] = 1.0
        if ga == 0:
            rep_a[:] = 1.0
        n = int(used.sum())
        out.append((rep_e, np.full(n, ge, np.int8), rep_a, np.full(n, ga, np.int8), W[used]))
    cat = [np.concatenate(x) for x in zip(*out)]
    return _canonical_joint(*cat, quantized=True)


# ---------------------------------------------------------------------------
# sign agreement
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SignAgreementReport:
    per_region_mass: np.ndarray  # rows: exact region, columns: approx region
    mismatch_mass: float
    trapped_mass: float

    @property
    def no_loss_condition(self) -> bool:
        """Regions of the two processes coincide at this node."""
        return self.mismatch_mass <= 1e-14

    def to_json(self) -> dict:
        return {
            "mismatch_mass": self.mismatch_mass,
            "trapped_mass": self.trapped_mass,
            "per_region_mass": self.per_region_mass.tolist(),
        }


def sign_agreement(j: JointLRDistribution) -> SignAgreementReport:
    mat = np.zeros((3, 3))
    np.add.at(mat, (j.ge.astype(int) + 1, j.ga.astype(int) + 1), j.mass)
    # region order <1, =1, >1 maps to side -1, 0, 1
    mismatch = float(mat.sum() - np.trace(mat))
    trapped = float(mat[0, 1] + mat[2, 1])
    return SignAgreementReport(mat, mismatch, trapped)


# ---------------------------------------------------------------------------
# tree trajectory
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NodeAgreement:
    path: PathIndex
    report: SignAgreementReport
    p_eq_exact: float
    p_eq_approx: float
    q_exact: float
    q_approx: float
    atom_count: int
    quantized: bool

    def to_json(self) -> dict:
        return {
            "path_bits": self.path.bit_string,
            "mismatch_mass": self.report.mismatch_mass,
            "trapped_mass": self.report.trapped_mass,
            "p_eq_exact": self.p_eq_exact,
            "p_eq_approx": self.p_eq_approx,
            "q_exact": self.q_exact,
            "q_approx": self.q_approx,
        }


@dataclass
class TrappedTrajectory:
    nodes: list[NodeAgreement]
    max_trapped: list[float] = field(default_factory=list)
    mean_trapped: list[float] = field(default_factory=list)
    max_mismatch: list[float] = field(default_factory=list)


def node_agreement(path: PathIndex, j: JointLRDistribution) -> NodeAgreement:
    pe = prob_partition(exact_marginal(j))
    pa = prob_partition(approx_marginal(j))
    return NodeAgreement(
        path=path,
        report=sign_agreement(j),
        p_eq_exact=pe.p_eq,
        p_eq_approx=pa.p_eq,
        q_exact=pe.p_less - pe.p_greater,
        q_approx=pa.p_less - pa.p_greater,
        atom_count=len(j),
        quantized=j.quantized,
    )


def trapped_mass_trajectory(root: LRDistribution, depth: int, approx: KernelId,
                            budget: QuantizationBudget = NO_BUDGET,
                            threads: int | None = None) -> TrappedTrajectory:
    """Sign agreement at every node of the depth-``depth`` tree, level by level."""
    require_standing_assumption(root)

    def step(j):
        return tuple(quantize_joint(joint_step(j, b, approx), budget) for b in ("minus", "plus"))

    traj = TrappedTrajectory(nodes=[])
    for lvl, nodes in enumerate(iter_levels(lift(root), depth, step, threads)):
        recs = [node_agreement(PathIndex.from_index(i, lvl), j) for i, j in enumerate(nodes)]
        traj.nodes.extend(recs)
        trapped = [r.report.trapped_mass for r in recs]
        traj.max_trapped.append(max(trapped))
        traj.mean_trapped.append(float(np.mean(trapped)))
        traj.max_mismatch.append(max(r.report.mismatch_mass for r in recs))
    return traj
