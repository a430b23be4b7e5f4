"""Symmetric B-DMCs represented by their likelihood-ratio distribution.

An output ``y`` of a binary-input channel ``W`` has likelihood ratio
``L(y) = W(y|1) / W(y|0)``.  Under the all-zeros input the channel is fully
described (for everything this package computes) by the distribution of
``L``, stored as a sorted list of atoms ``(lr, mass)``.

Internally every LR value is handled in *folded* sign/magnitude form::

    key  = min(lr, 1/lr)   in [0, 1]
    side = -1 if lr < 1, 0 if lr == 1, +1 if lr > 1

Keys are rounded onto a fixed binary grid so that LR values produced by
different arithmetic paths merge deterministically, and the ``lr == 1``
region is decided by exact comparisons between rounded keys.

For a symmetric channel the two atoms ``key`` and ``1/key`` carry the masses
``M/(1+key)`` and ``key*M/(1+key)`` of a single *pair mass* ``M``; the
canonical form is rebuilt from pair masses, so the mass relation
``P[L = 1/l] = l * P[L = l]`` holds by construction.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.special import ndtr

# Keys keep 48 of the 52 fraction bits (about 14.5 significant digits).
KEY_BITS = 48
_DROP = 52 - KEY_BITS
_HALF = np.uint64(1 << (_DROP - 1))
_MASK = np.uint64(~((1 << _DROP) - 1) & 0xFFFFFFFFFFFFFFFF)

LR_FLOOR = 1e-300  # keys below this are flushed to 0 (1/key would overflow)
PRUNE_FLOOR = 1e-15
EPS = float(np.finfo(np.float64).eps)
DEFAULT_TOL = 1e-12
REPAIR_LIMIT = 1e-6


class ChannelError(ValueError):
    """Base class for invalid channel descriptions."""


class DomainError(ChannelError):
    pass


class ConsistencyError(ChannelError):
    pass


class SymmetryError(ChannelError):
    pass


class DegenerateOutputError(ChannelError):
    pass


class StandingAssumptionError(ChannelError):
    """Raised when P[L > 1] > P[L < 1]."""


class LRAtom(NamedTuple):
    lr: float
    mass: float


def round_key(s: np.ndarray) -> np.ndarray:
    """Round nonnegative floats to the key grid (round-half-up on the bit pattern)."""
    s = np.ascontiguousarray(s, dtype=np.float64)
    bits = s.view(np.uint64)
    return ((bits + _HALF) & _MASK).view(np.float64)


def fold(lr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split LR values into rounded keys in [0, 1] and sides in {-1, 0, 1}."""
    lr = np.asarray(lr, dtype=np.float64)
    upper = lr > 1.0
    with np.errstate(divide="ignore"):
        s = np.where(upper, 1.0 / np.where(upper, lr, 1.0), lr)
    s = round_key(s)
    side = np.where(upper, 1, -1).astype(np.int8)
    side[s == 1.0] = 0
    return s, side


def unfold(s: np.ndarray, side: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(side > 0, 1.0 / np.where(side > 0, s, 1.0), s)


def _tidy_keys(s, side, symmetric):
    s = round_key(s)
    side = np.asarray(side, dtype=np.int8).copy()
    side[s == 1.0] = 0
    s = np.where(side == 0, 1.0, s)
    tiny = s < LR_FLOOR
    if symmetric:
        s = np.where(tiny, 0.0, s)
        side = np.where(tiny, -1, side).astype(np.int8)
    else:
        # upper atoms keep their region; lower atoms become exact zeros
        s = np.where(tiny & (side > 0), LR_FLOOR, np.where(tiny, 0.0, s))
    return s, side


def _renormalize(m: np.ndarray, pruned: bool) -> np.ndarray:
    # rescale once the total drifts past what summing len(m) terms can explain;
    # repeated plus steps would otherwise double the drift every level
    total = m.sum()
    if pruned or abs(total - 1.0) > 4 * EPS * max(len(m), 2):
        m = m / total
    return m


def _check_total(m: np.ndarray, tolerance: float) -> None:
    total = float(np.sum(m))
    if not math.isfinite(total) or abs(total - 1.0) > 10 * tolerance:
        raise ConsistencyError(f"total mass {total!r} deviates from 1")
    if np.any(m < -tolerance):
        raise ConsistencyError("negative atom mass")


def _complement(total: np.ndarray, part: np.ndarray) -> np.ndarray:
    """``total - part``, nudged by ulps so that ``rest + part`` rounds back to ``total``."""
    rest = total - part
    for _ in range(4):
        s = rest + part
        if np.array_equal(s, total):
            break
        rest = np.where(s > total, np.nextafter(rest, -np.inf),
                        np.where(s < total, np.nextafter(rest, np.inf), rest))
    return rest


def _split(total: np.ndarray, part: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split ``total`` into ``(rest, part')`` with ``rest + part'`` exactly ``total``.

    When every candidate sum is a rounding tie the target can be unreachable;
    ``part`` then moves by one ulp toward zero.  The split depends only on the
    inputs, which keeps canonicalization idempotent.
    """
    part = np.array(part, dtype=np.float64)
    for _ in range(4):
        rest = _complement(total, part)
        bad = (rest + part) != total
        if not bad.any():
            break
        part = np.where(bad, np.nextafter(part, 0.0), part)
    return rest, part


def pairs_to_atoms(keys: np.ndarray, pair_mass: np.ndarray):
    """Expand pair masses on sorted unique keys into canonical (lr, mass) arrays."""
    inner = (keys > 0) & (keys < 1)
    lo, hi = _split(pair_mass, np.where(inner, pair_mass * keys / (1.0 + keys), 0.0))
    drop_hi = inner & (hi < PRUNE_FLOOR)
    lo = np.where(drop_hi, pair_mass, lo)
    keep_hi = inner & ~drop_hi

    lower = keys < 1
    lr = np.concatenate([keys[lower], keys[keys == 1.0], 1.0 / keys[keep_hi][::-1]])
    mass = np.concatenate([lo[lower], pair_mass[keys == 1.0], hi[keep_hi][::-1]])
    return lr, mass


def snap_keys(s: np.ndarray, m: np.ndarray, rtol: float) -> np.ndarray:
    """Replace chains of keys within ``rtol`` of each other by their mass-weighted mean.

    Keys 0 and 1 are never moved; a cluster touching 1, or within ``rtol``
    of it, snaps to 1.
    """
    s = np.asarray(s, dtype=np.float64)
    if len(s) < 2:
        return s
    order = np.argsort(s, kind="stable")
    ss, mm = s[order], np.asarray(m, dtype=np.float64)[order]
    new = np.ones(len(ss), dtype=bool)
    new[1:] = (ss[1:] - ss[:-1]) > rtol * ss[1:]
    cid = np.cumsum(new) - 1
    W = np.bincount(cid, weights=mm)
    V = np.bincount(cid, weights=mm * ss)
    rep = np.where(W > 0, V / np.where(W > 0, W, 1.0), np.bincount(cid, weights=ss) / np.bincount(cid))
    touches_one = (np.bincount(cid, weights=(ss == 1.0).astype(float)) > 0) | (1.0 - rep <= rtol)
    touches_zero = np.bincount(cid, weights=(ss == 0.0).astype(float)) > 0
    rep = np.where(touches_one, 1.0, np.where(touches_zero, 0.0, rep))
    out = np.empty_like(s)
    out[order] = rep[cid]
    return out


def _canonical_symmetric(s, side, m, tolerance=DEFAULT_TOL, max_asymmetry=None):
    if max_asymmetry is not None:
        # user-supplied values: a pair typed as (x, 1/x) may not fold to one key bit-exactly
        s = snap_keys(s, m, max_asymmetry)
    s, side = _tidy_keys(s, side, symmetric=True)
    keys, inv = np.unique(s, return_inverse=True)
    m_lo = np.bincount(inv, weights=np.where(side <= 0, m, 0.0), minlength=len(keys))
    m_hi = np.bincount(inv, weights=np.where(side > 0, m, 0.0), minlength=len(keys))

    if max_asymmetry is not None:
        inner = (keys > 0) & (keys < 1)
        denom = m_hi + keys * m_lo
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.where(inner & (denom > 0), np.abs(m_hi - keys * m_lo) / denom, 0.0)
        at_zero = keys == 0.0
        rel = np.where(at_zero & (m_hi > 0), 1.0, rel)
        worst = int(np.argmax(rel)) if len(rel) else 0
        if len(rel) and rel[worst] > max_asymmetry:
            k = keys[worst]
            raise SymmetryError(
                f"mass relation violated at lr pair ({k!r}, {1 / k if k else math.inf!r}): "
                f"P[1/l]={m_hi[worst]!r} vs l*P[l]={k * m_lo[worst]!r}"
            )

    pair = m_lo + m_hi
    keep = pair >= PRUNE_FLOOR
    pruned = not bool(keep.all())
    keys, pair = keys[keep], _renormalize(pair[keep], pruned)
    return pairs_to_atoms(keys, pair)


def _canonical_general(s, side, m):
    s, side = _tidy_keys(s, side, symmetric=False)
    lr = unfold(s, side)
    values, inv = np.unique(lr, return_inverse=True)
    mass = np.bincount(inv, weights=m, minlength=len(values))
    keep = mass >= PRUNE_FLOOR
    pruned = not bool(keep.all())
    return values[keep], _renormalize(mass[keep], pruned)


@dataclass(frozen=True, eq=False)
class LRDistribution:
    """Distribution of the likelihood ratio under the all-zeros input.

    ``symmetric`` marks distributions that satisfy the symmetric-channel mass
    relation; outputs of the approximate minus kernels are not true LR
    distributions and carry ``symmetric=False``.
    """

    lr: np.ndarray
    mass: np.ndarray
    symmetric: bool = True
    tolerance: float = DEFAULT_TOL

    def __post_init__(self):
        lr = np.array(self.lr, dtype=np.float64)
        mass = np.array(self.mass, dtype=np.float64)
        if lr.ndim != 1 or lr.shape != mass.shape or len(lr) == 0:
            raise ConsistencyError("lr and mass must be equal-length nonempty 1-D arrays")
        if not np.all(np.isfinite(lr)) or np.any(lr < 0):
            raise DomainError("likelihood ratios must be finite and nonnegative")
        if np.any(np.diff(lr) <= 0):
            raise ConsistencyError("lr values must be strictly increasing")
        _check_total(mass, self.tolerance)
        lr.flags.writeable = False
        mass.flags.writeable = False
        object.__setattr__(self, "lr", lr)
        object.__setattr__(self, "mass", mass)

    def __len__(self) -> int:
        return len(self.lr)

    def __repr__(self) -> str:
        body = ", ".join(f"({l:.7g}, {m:.7g})" for l, m in zip(self.lr[:6], self.mass[:6]))
        more = ", ..." if len(self) > 6 else ""
        return f"LRDistribution([{body}{more}], symmetric={self.symmetric})"

    @property
    def atoms(self) -> list[LRAtom]:
        return [LRAtom(float(l), float(m)) for l, m in zip(self.lr, self.mass)]

    @cached_property
    def folded(self) -> tuple[np.ndarray, np.ndarray]:
        """(key, side) arrays aligned with ``lr``."""
        return fold(self.lr)

    @cached_property
    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Sorted unique keys and their pair masses (symmetric distributions only)."""
        s, _ = self.folded
        keys, inv = np.unique(s, return_inverse=True)
        return keys, np.bincount(inv, weights=self.mass, minlength=len(keys))

    def symmetry_residual(self) -> float:
        """Largest |P[L=1/l] - l*P[L=l]| over atoms with 0 < l < 1."""
        s, side = self.folded
        keys, inv = np.unique(s, return_inverse=True)
        lo = np.bincount(inv, weights=np.where(side <= 0, self.mass, 0.0), minlength=len(keys))
        hi = np.bincount(inv, weights=np.where(side > 0, self.mass, 0.0), minlength=len(keys))
        inner = (keys > 0) & (keys < 1)
        res = np.abs(hi - keys * lo)[inner]
        return float(res.max()) if len(res) else 0.0

    def matrix(self) -> "TransitionMatrix":
        """Render as a transition matrix; ``from_transition_matrix`` inverts this."""
        rows = [(m, l * m) for l, m in zip(self.lr, self.mass)]
        rows += [(0.0, m) for l, m in zip(self.lr, self.mass) if l == 0.0]
        return TransitionMatrix(np.array(rows))


def canonicalize(
    d: LRDistribution | Iterable[Sequence[float]],
    symmetric: bool | None = None,
    tolerance: float = DEFAULT_TOL,
    max_asymmetry: float | None = None,
) -> LRDistribution:
    """Sort, merge equal LR values, prune dust and (if symmetric) re-impose the mass relation.

    Symmetric repair projects each ``(l, 1/l)`` pair onto the relation keeping
    the pair's total mass.  With ``max_asymmetry`` set, a relative violation
    above it raises ``SymmetryError`` instead of being repaired.
    """
    if isinstance(d, LRDistribution):
        lr, m = d.lr, d.mass
        if symmetric is None:
            symmetric = d.symmetric
    else:
        arr = np.asarray(list(d), dtype=np.float64).reshape(-1, 2)
        lr, m = arr[:, 0], arr[:, 1]
    if symmetric is None:
        symmetric = True
    if np.any(np.isnan(lr)) or np.any(lr < 0):
        raise DomainError("likelihood ratios must be nonnegative")
    _check_total(m, tolerance)
    m = np.clip(m, 0.0, None)
    s, side = fold(lr)
    return from_folded(s, side, m, symmetric, tolerance, max_asymmetry)


def from_folded(s, side, m, symmetric=True, tolerance=DEFAULT_TOL, max_asymmetry=None):
    if symmetric:
        lr, mass = _canonical_symmetric(s, side, m, tolerance, max_asymmetry)
    else:
        lr, mass = _canonical_general(s, side, m)
    return LRDistribution(lr, mass, symmetric=symmetric, tolerance=tolerance)


def from_pairs(keys, pair_mass, tolerance=DEFAULT_TOL) -> LRDistribution:
    """Symmetric distribution from (key, pair mass) arrays; keys may repeat."""
    keys = np.asarray(keys, dtype=np.float64)
    return from_folded(keys, np.full(len(keys), -1, np.int8), np.asarray(pair_mass, float),
                       True, tolerance)


def allclose(a: LRDistribution, b: LRDistribution, atol: float = 1e-10, rtol: float = 1e-9) -> bool:
    """Atom-wise comparison after merging LR values closer than ``rtol``.

    Tolerates the rare case where one value lands on either side of a key
    rounding boundary along two arithmetic paths.
    """
    la, ma = _cluster(a.lr, a.mass, rtol)
    lb, mb = _cluster(b.lr, b.mass, rtol)
    if len(la) != len(lb):
        return False
    return bool(np.allclose(la, lb, rtol=rtol, atol=0.0) and np.allclose(ma, mb, rtol=0.0, atol=atol))


def _cluster(lr, mass, rtol):
    out_l, out_m = [], []
    for l, m in zip(lr, mass):
        if out_l and abs(l - out_l[-1]) <= rtol * max(l, out_l[-1]):
            out_m[-1] += m
        else:
            out_l.append(l)
            out_m.append(m)
    return np.array(out_l), np.array(out_m)


def standing_assumption_ok(d: LRDistribution, tol: float = 1e-12) -> bool:
    s, side = d.folded
    return float(d.mass[side > 0].sum()) <= float(d.mass[side < 0].sum()) + tol


def require_standing_assumption(d: LRDistribution) -> None:
    if not standing_assumption_ok(d):
        raise StandingAssumptionError("channel has P[L > 1] > P[L < 1]")


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def make_bsc(p: float) -> LRDistribution:
    if not 0.0 <= p <= 0.5:
        raise DomainError(f"BSC crossover must lie in [0, 0.5], got {p!r}")
    if p == 0.0:
        return LRDistribution([0.0], [1.0])
    key = p / (1.0 - p)
    return from_pairs([key], [1.0])


def make_bec(eps: float) -> LRDistribution:
    if not 0.0 <= eps <= 1.0:
        raise DomainError(f"BEC erasure probability must lie in [0, 1], got {eps!r}")
    return canonicalize([(0.0, 1.0 - eps), (1.0, eps)])


def make_awgn_quantized(sigma: float, levels: int) -> LRDistribution:
    """BPSK over AWGN with noise std ``sigma``, LLR magnitude split into ``levels`` bins.

    Bin ``j`` collects both signs of ``|llr|`` in ``[b_j, b_{j+1})``; its pair is
    represented by the bin's conditional crossover, which keeps the
    mass-weighted mean LR of each side.
    """
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    if levels < 1:
        raise DomainError("levels must be >= 1")
    mu = 2.0 / sigma**2  # llr = log W(y|0)/W(y|1) ~ N(mu, 2 mu) given x = 0
    sd = 2.0 / sigma
    top = mu + 8.0 * sd
    edges = np.linspace(0.0, top, levels + 1)
    edges[-1] = np.inf
    a, b = edges[:-1], edges[1:]

    def prob(lo, hi):
        # P[lo <= llr < hi] computed on the side of the mean that avoids cancellation
        zl, zh = (lo - mu) / sd, (hi - mu) / sd
        upper_tail = ndtr(-zl) - ndtr(-zh)
        lower_tail = ndtr(zh) - ndtr(zl)
        return np.where(zl > 0, upper_tail, lower_tail)

    good = prob(a, b)           # llr > 0: favours the sent 0, lr < 1
    bad = prob(-b, -a)          # llr < 0
    pair = good + bad
    keep = pair > 0
    p = bad[keep] / pair[keep]
    keys = p / (1.0 - p)
    return from_pairs(keys, pair[keep] / pair[keep].sum())


def random_symmetric(rng: np.random.Generator, n_atoms: int | None = None) -> LRDistribution:
    """Random symmetric LR distribution with 2..10 atoms (before merging)."""
    if n_atoms is None:
        n_atoms = int(rng.integers(2, 11))
    with_zero = bool(rng.random() < 0.3)
    with_one = bool(rng.random() < 0.3)
    n_pairs = max(0, (n_atoms - with_zero - with_one) // 2)
    if n_pairs == 0 and not with_zero and not with_one:
        n_pairs = 1
    keys = list(rng.uniform(0.0, 1.0, size=n_pairs) ** rng.uniform(0.5, 4.0))
    keys += [0.0] * with_zero + [1.0] * with_one
    weights = rng.dirichlet(np.ones(len(keys)))
    return from_pairs(keys, weights)


# ---------------------------------------------------------------------------
# transition matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Rows ``(W(y|0), W(y|1))``, one per output symbol."""

    rows: np.ndarray
    tolerance: float = 1e-9

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.float64).reshape(-1, 2)
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)

    def validate(self) -> None:
        rows = self.rows
        if np.any(~np.isfinite(rows)) or np.any(rows < 0):
            raise DomainError("transition probabilities must be finite and nonnegative")
        for col in (0, 1):
            total = rows[:, col].sum()
            if abs(total - 1.0) > self.tolerance:
                raise ConsistencyError(f"column W(.|{col}) sums to {total!r}, not 1")
        dead = np.flatnonzero((rows[:, 0] == 0) & (rows[:, 1] == 0))
        if len(dead):
            raise DegenerateOutputError(f"output rows {dead.tolist()} have zero probability")
        self._check_symmetry()

    def _check_symmetry(self) -> None:
        # A symmetric channel has P1[L = v] == P0[L = 1/v] for every LR value v.
        w0, w1 = self.rows[:, 0], self.rows[:, 1]
        s, side = _row_keys(w0, w1)
        s = snap_keys(s, np.maximum(w0, w1), REPAIR_LIMIT)
        side = np.where(s == 1.0, 0, side)
        groups: dict[tuple[float, int], list[int]] = {}
        for i, key in enumerate(zip(s.tolist(), side.tolist())):
            groups.setdefault(key, []).append(i)
        worst, worst_rows = 0.0, None
        for (k, sd), idx in groups.items():
            partner = groups.get((k, -sd), [])
            p1 = w1[idx].sum()
            p0 = w0[partner].sum() if partner else 0.0
            scale = max(p1, p0)
            rel = abs(p1 - p0) / scale if scale > 0 else 0.0
            if rel > worst:
                worst, worst_rows = rel, (idx, partner)
        if worst > REPAIR_LIMIT:
            a, b = worst_rows
            raise SymmetryError(f"channel is not symmetric: rows {a} vs rows {b} "
                                f"(relative mismatch {worst:.3g})")


def from_transition_matrix(W: TransitionMatrix | Sequence[Sequence[float]]) -> LRDistribution:
    if not isinstance(W, TransitionMatrix):
        W = TransitionMatrix(np.asarray(W, dtype=np.float64))
    W.validate()
    w0, w1 = W.rows[:, 0], W.rows[:, 1]
    live = w0 > 0
    s, side = _row_keys(w0[live], w1[live])
    m = w0[live] / w0[live].sum()
    return from_folded(s, side, m, True, DEFAULT_TOL, REPAIR_LIMIT)


def _row_keys(w0, w1):
    """Folded keys min(w0, w1) / max(w0, w1): bit-identical for swapped rows."""
    hi = np.maximum(w0, w1)
    s = round_key(np.minimum(w0, w1) / np.where(hi > 0, hi, 1.0))
    side = np.where(w1 > w0, 1, -1).astype(np.int8)
    side[s == 1.0] = 0
    return s, side


# ---------------------------------------------------------------------------
# channel spec files
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelSpec:
    type: str
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"type": self.type, **self.params}


_REQUIRED = {"bsc": ("p",), "bec": ("eps",), "awgn": ("sigma", "levels"),
             "custom": ("rows",), "lr": ("atoms",)}


def parse_channel_spec(source: str | dict | Path) -> ChannelSpec:
    """Accept a dict, an inline JSON string, or a path to a JSON file."""
    if isinstance(source, dict):
        obj = source
    else:
        text = str(source)
        if not text.lstrip().startswith("{"):
            text = Path(text).read_text()
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ChannelError(f"channel spec: invalid JSON at line {exc.lineno} "
                               f"column {exc.colno}: {exc.msg}") from None
    if not isinstance(obj, dict) or "type" not in obj:
        raise ChannelError("channel spec must be an object with a 'type' field")
    kind = obj["type"]
    if kind not in _REQUIRED:
        raise ChannelError(f"channel spec: unknown type {kind!r}")
    missing = [k for k in _REQUIRED[kind] if k not in obj]
    if missing:
        raise ChannelError(f"channel spec: type {kind!r} requires field(s) {missing}")
    return ChannelSpec(kind, {k: v for k, v in obj.items() if k != "type"})


def build_channel(spec: ChannelSpec | dict | str) -> LRDistribution:
    if not isinstance(spec, ChannelSpec):
        spec = parse_channel_spec(spec)
    p = spec.params
    if spec.type == "bsc":
        d = make_bsc(float(p["p"]))
    elif spec.type == "bec":
        d = make_bec(float(p["eps"]))
    elif spec.type == "awgn":
        d = make_awgn_quantized(float(p["sigma"]), int(p["levels"]))
    elif spec.type == "custom":
        d = from_transition_matrix(TransitionMatrix(np.asarray(p["rows"], dtype=float)))
    else:
        d = canonicalize([tuple(a) for a in p["atoms"]], max_asymmetry=REPAIR_LIMIT)
    require_standing_assumption(d)
    return d
