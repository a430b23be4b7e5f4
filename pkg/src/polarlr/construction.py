"""Information-set selection from synthetic-channel records."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .engine import SyntheticChannelRecord

METRICS = ("pe", "z", "q")


@dataclass(frozen=True)
class CodeSpec:
    n: int
    info_set: tuple[int, ...]
    metric_used: str = "pe"
    union_bound: float = 0.0
    frozen_set: tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self):
        N = 1 << self.n
        info = tuple(sorted(int(i) for i in self.info_set))
        if len(set(info)) != len(info) or any(not 0 <= i < N for i in info):
            raise ValueError(f"info_set must hold distinct indices in [0, {N})")
        object.__setattr__(self, "info_set", info)
        chosen = set(info)
        object.__setattr__(self, "frozen_set", tuple(i for i in range(N) if i not in chosen))
        if self.metric_used not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")

    @property
    def block_length(self) -> int:
        return 1 << self.n

    @property
    def k(self) -> int:
        return len(self.info_set)

    @property
    def rate(self) -> float:
        return self.k / self.block_length

    def info_mask(self) -> np.ndarray:
        mask = np.zeros(self.block_length, dtype=bool)
        mask[list(self.info_set)] = True
        return mask

    def to_json(self) -> dict:
        return {"n": self.n, "k": self.k, "info_set": list(self.info_set),
                "metric_used": self.metric_used, "union_bound": self.union_bound}

    @classmethod
    def from_json(cls, obj: dict) -> "CodeSpec":
        spec = cls(int(obj["n"]), tuple(obj["info_set"]), obj.get("metric_used", "pe"),
                   float(obj.get("union_bound", 0.0)))
        if "k" in obj and int(obj["k"]) != spec.k:
            raise ValueError(f"k={obj['k']} disagrees with |info_set|={spec.k}")
        return spec

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "CodeSpec":
        return cls.from_json(json.loads(Path(path).read_text()))


def _score(rec: SyntheticChannelRecord, metric: str) -> float:
    # smaller is better for every metric; Q is negated
    if metric == "q":
        return -rec.metrics.q
    return getattr(rec.metrics, metric)


def select_frozen(records: Sequence[SyntheticChannelRecord], k: int, metric: str = "pe") -> CodeSpec:
    """Pick the ``k`` most reliable leaves; ties go to the smaller leaf index."""
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")
    if not records:
        raise ValueError("no records")
    depth = records[0].path.depth
    N = 1 << depth
    idx = sorted(r.path.index for r in records)
    if len(records) != N or idx != list(range(N)):
        raise ValueError(f"records do not cover the {N} leaves of one depth-{depth} tree")
    if not 0 <= k <= N:
        raise ValueError(f"k must lie in [0, {N}], got {k}")
    ranked = sorted(records, key=lambda r: (_score(r, metric), r.path.index))
    chosen = ranked[:k]
    union = float(sum(sorted(r.metrics.pe for r in chosen)))
    return CodeSpec(depth, tuple(r.path.index for r in chosen), metric, union)


@dataclass(frozen=True)
class ConstructionDiff:
    only_a: tuple[int, ...]
    only_b: tuple[int, ...]
    overlap: int
    union_bound_a: float
    union_bound_b: float

    @property
    def identical(self) -> bool:
        return not self.only_a and not self.only_b

    def to_json(self) -> dict:
        return {"only_a": list(self.only_a), "only_b": list(self.only_b), "overlap": self.overlap,
                "union_bound_a": self.union_bound_a, "union_bound_b": self.union_bound_b}


def compare_constructions(a: CodeSpec, b: CodeSpec) -> ConstructionDiff:
    if a.n != b.n or a.k != b.k:
        raise ValueError(f"cannot compare (n={a.n}, k={a.k}) with (n={b.n}, k={b.k})")
    sa, sb = set(a.info_set), set(b.info_set)
    return ConstructionDiff(tuple(sorted(sa - sb)), tuple(sorted(sb - sa)), len(sa & sb),
                            a.union_bound, b.union_bound)
