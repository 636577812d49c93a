"""Shared domain types and warping-path utilities.

All indices are 0-based. A warping path is stored as an ``(m, 2)`` integer
array of ``(source, target)`` frame pairs; selection matrices are derived on
demand and never stored.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

LEGAL_STEPS = ((1, 0), (0, 1), (1, 1))


class AlignmentError(Exception):
    """Base class for domain errors raised by this package."""


class InvalidPathError(AlignmentError, ValueError):
    pass


class DimensionMismatchError(AlignmentError, ValueError):
    pass


class FeatureFormatError(Exception):
    """Malformed or unsupported on-disk data (I/O-level, not domain-level)."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _pt(a) -> tuple:
    return tuple(int(v) for v in a)


@dataclass(frozen=True, eq=False)
class FeatureSequence:
    """A ``d x n`` matrix of per-frame features.

    Columns are frames. ``sample_rate`` is 0 for synthetic or feature-only
    sequences.
    """

    data: np.ndarray
    hop_seconds: float = 0.005
    sample_rate: int = 0
    label: str = ""

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2:
            raise DimensionMismatchError(f"feature data must be 2-D (d x n), got ndim={data.ndim}")
        d, n = data.shape
        if d < 1 or n < 1:
            raise DimensionMismatchError(f"feature data must have d >= 1 and n >= 1, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError(f"feature sequence {self.label!r} contains NaN or Inf")
        if self.hop_seconds <= 0:
            raise ValueError(f"hop_seconds must be positive, got {self.hop_seconds}")
        object.__setattr__(self, "data", _readonly(data))

    @property
    def d(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]

    def with_data(self, data: np.ndarray, label: Optional[str] = None) -> "FeatureSequence":
        return FeatureSequence(data, self.hop_seconds, self.sample_rate,
                               self.label if label is None else label)

    def __eq__(self, other):
        if not isinstance(other, FeatureSequence):
            return NotImplemented
        return (np.array_equal(self.data, other.data) and self.hop_seconds == other.hop_seconds
                and self.sample_rate == other.sample_rate and self.label == other.label)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class WarpingPath:
    """Ordered ``(i, j)`` frame pairs; ``i`` indexes the source, ``j`` the target."""

    pairs: np.ndarray

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=np.int64)
        if pairs.size == 0:
            pairs = pairs.reshape(0, 2)
        if pairs.ndim != 2 or pairs.shape[1] != 2:
            raise InvalidPathError(f"path must be an (m, 2) array of index pairs, got shape {pairs.shape}")
        object.__setattr__(self, "pairs", _readonly(pairs.copy()))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[int]]) -> "WarpingPath":
        return cls(np.array(list(pairs), dtype=np.int64).reshape(-1, 2))

    @property
    def m(self) -> int:
        return self.pairs.shape[0]

    @property
    def i(self) -> np.ndarray:
        return self.pairs[:, 0]

    @property
    def j(self) -> np.ndarray:
        return self.pairs[:, 1]

    def swapped(self) -> "WarpingPath":
        return WarpingPath(self.pairs[:, ::-1])

    def to_list(self) -> list:
        return [tuple(int(v) for v in p) for p in self.pairs]

    def __len__(self):
        return self.m

    def __eq__(self, other):
        if not isinstance(other, WarpingPath):
            return NotImplemented
        return np.array_equal(self.pairs, other.pairs)

    __hash__ = None

    def __repr__(self):
        if self.m <= 6:
            return f"WarpingPath({self.to_list()})"
        head = ", ".join(str(p) for p in self.to_list()[:3])
        return f"WarpingPath([{head}, ... {_pt(self.pairs[-1])}], m={self.m})"


@dataclass(frozen=True)
class PathVerdict:
    ok: bool
    constraint: Optional[str] = None
    index: Optional[int] = None
    message: str = ""

    def __bool__(self):
        return self.ok


@dataclass(frozen=True)
class AlignmentResult:
    """Outcome of a DTW or CTW run.

    ``final_cost`` is the objective of the returned path: the raw accumulated
    cost for DTW, the path-length-normalized projected cost for CTW.
    ``raw_cost`` and ``normalized_cost`` are always both reported.
    """

    path: WarpingPath
    final_cost: float
    objective_trace: tuple
    projections: Optional[object] = None
    raw_cost: float = 0.0
    normalized_cost: float = 0.0
    n_iter: int = 1
    converged: bool = True
    best_iter: int = 0
    warnings: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        out = {
            "final_cost": float(self.final_cost),
            "raw_cost": float(self.raw_cost),
            "normalized_cost": float(self.normalized_cost),
            "objective_trace": [float(v) for v in self.objective_trace],
            "n_iter": int(self.n_iter),
            "best_iter": int(self.best_iter),
            "converged": bool(self.converged),
            "path_length": int(self.path.m),
            "warnings": list(self.warnings),
        }
        if self.projections is not None:
            out["projections"] = self.projections.to_dict()
        return out


def validate_path(path: WarpingPath, n_x: int, n_y: int) -> PathVerdict:
    """Check boundary, step and length constraints of ``path`` against ``(n_x, n_y)``.

    Returns a verdict naming the first violated constraint and the index of
    the offending pair. Raises ``InvalidPathError`` for an empty path.
    """
    if n_x < 1 or n_y < 1:
        raise ValueError(f"sequence lengths must be >= 1, got n_x={n_x}, n_y={n_y}")
    p = path.pairs
    m = p.shape[0]
    if m == 0:
        raise InvalidPathError("empty warping path")

    if p[:, 0].min() < 0 or p[:, 1].min() < 0 or p[:, 0].max() >= n_x or p[:, 1].max() >= n_y:
        bad = np.nonzero((p[:, 0] < 0) | (p[:, 1] < 0) | (p[:, 0] >= n_x) | (p[:, 1] >= n_y))[0][0]
        return PathVerdict(False, "range", int(bad),
                           f"pair {_pt(p[bad])} at index {bad} outside [0,{n_x}) x [0,{n_y})")
    if p[0, 0] != 0 or p[0, 1] != 0:
        return PathVerdict(False, "boundary", 0, f"path starts at {_pt(p[0])}, expected (0, 0)")

    steps = np.diff(p, axis=0)
    legal = (((steps[:, 0] == 1) | (steps[:, 0] == 0)) & ((steps[:, 1] == 1) | (steps[:, 1] == 0))
             & (steps.sum(axis=1) > 0))
    if not legal.all():
        k = int(np.nonzero(~legal)[0][0])
        return PathVerdict(False, "continuity", k + 1,
                           f"illegal step {_pt(steps[k])} from {_pt(p[k])} to {_pt(p[k + 1])}")

    if p[-1, 0] != n_x - 1 or p[-1, 1] != n_y - 1:
        return PathVerdict(False, "boundary", m - 1,
                           f"path ends at {_pt(p[-1])}, expected {(n_x - 1, n_y - 1)}")
    # implied by the checks above, kept as an explicit guard
    if not (max(n_x, n_y) <= m <= n_x + n_y - 1):
        return PathVerdict(False, "length", m - 1, f"path length {m} outside [{max(n_x, n_y)}, {n_x + n_y - 1}]")
    return PathVerdict(True)


def check_path(path: WarpingPath, n_x: int, n_y: int) -> None:
    verdict = validate_path(path, n_x, n_y)
    if not verdict:
        raise InvalidPathError(f"invalid warping path ({verdict.constraint}): {verdict.message}")


def path_to_selection_matrices(path: WarpingPath, n_x: int, n_y: int):
    """Binary ``(m, n_x)`` and ``(m, n_y)`` matrices with one 1 per row."""
    check_path(path, n_x, n_y)
    m = path.m
    rows = np.arange(m)
    w_x = np.zeros((m, n_x), dtype=np.uint8)
    w_y = np.zeros((m, n_y), dtype=np.uint8)
    w_x[rows, path.i] = 1
    w_y[rows, path.j] = 1
    return w_x, w_y


def connect_anchors(anchors_i: np.ndarray, anchors_j: np.ndarray) -> WarpingPath:
    """Join monotone anchor points with legal unit steps, dropping duplicates.

    Anchors must be non-decreasing in both coordinates. Between two anchors
    the path moves vertically/horizontally first and takes the diagonal into
    the next anchor, so a jump of one in each coordinate is a single
    diagonal step.
    """
    ai = np.asarray(anchors_i, dtype=np.int64)
    aj = np.asarray(anchors_j, dtype=np.int64)
    if np.any(np.diff(ai) < 0) or np.any(np.diff(aj) < 0):
        raise InvalidPathError("anchor points must be non-decreasing")
    out = [(int(ai[0]), int(aj[0]))]
    for ni, nj in zip(ai[1:].tolist(), aj[1:].tolist()):
        ci, cj = out[-1]
        if ni == ci and nj == cj:
            continue
        if ni == ci or nj == cj:
            out.extend((ii, jj) for ii, jj in zip(
                range(ci + 1, ni + 1) if ni > ci else [ci] * (nj - cj),
                range(cj + 1, nj + 1) if nj > cj else [cj] * (ni - ci)))
            continue
        out.extend((ii, cj) for ii in range(ci + 1, ni))
        out.extend((ni - 1, jj) for jj in range(cj + 1, nj))
        out.append((ni, nj))
    return WarpingPath.from_pairs(out)


def path_cost(cost: np.ndarray, path: WarpingPath) -> float:
    return float(cost[path.i, path.j].sum())
