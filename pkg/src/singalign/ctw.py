"""Canonical time warping: alternate CCA on the current pairing with DTW in the projected space."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cca import ProjectionPair, cca_fit, project
from .core import AlignmentResult, DimensionMismatchError, WarpingPath, check_path, connect_anchors
from .dtw import _as_matrix, _check_pair, dtw_align

logger = logging.getLogger(__name__)

INIT_CHOICES = ("dtw", "uniform")
# canonical correlations at or below this count as absent for the rank guard
RANK_EPS = 1e-8


@dataclass(frozen=True)
class CtwConfig:
    init: str = "uniform"
    b: Optional[int] = None
    lam: Optional[float] = None
    max_iter: int = 30
    tol: float = 1e-4

    def __post_init__(self):
        if self.init not in INIT_CHOICES:
            raise ValueError(f"init must be one of {INIT_CHOICES}, got {self.init!r}")
        if self.b is not None and self.b < 1:
            raise ValueError(f"b must be >= 1, got {self.b}")
        if self.lam is not None and self.lam < 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")

    def embedding_dim(self, d: int) -> int:
        return min(d, 10) if self.b is None else self.b


def _half_up_div(num: int, den: int) -> int:
    return (2 * num + den) // (2 * den)


def uniform_init(n_x: int, n_y: int) -> WarpingPath:
    """Linear-scaling path: both sequences stretched to ``L = max(n_x, n_y)`` samples."""
    if n_x < 1 or n_y < 1:
        raise ValueError(f"sequence lengths must be >= 1, got n_x={n_x}, n_y={n_y}")
    L = max(n_x, n_y)
    if L == 1:
        return WarpingPath.from_pairs([(0, 0)])
    k = np.arange(L)
    ai = np.array([_half_up_div(int(v) * (n_x - 1), L - 1) for v in k])
    aj = np.array([_half_up_div(int(v) * (n_y - 1), L - 1) for v in k])
    return connect_anchors(ai, aj)


def ctw_objective(x, y, proj: ProjectionPair, path: WarpingPath) -> float:
    """Squared Frobenius distance of the projected, path-expanded sequences divided by ``m``."""
    xm, ym = _as_matrix(x), _as_matrix(y)
    if xm.shape[0] != proj.v_x.shape[0] or ym.shape[0] != proj.v_y.shape[0]:
        raise DimensionMismatchError(
            f"sequence dims ({xm.shape[0]}, {ym.shape[0]}) do not match projection dims "
            f"({proj.v_x.shape[0]}, {proj.v_y.shape[0]})")
    check_path(path, xm.shape[1], ym.shape[1])
    diff = project(xm[:, path.i], "source", proj) - project(ym[:, path.j], "target", proj)
    return float(np.einsum("ij,ij->", diff, diff)) / path.m


def _fit_projection(x, y, path, b, lam, notes):
    proj = cca_fit(x[:, path.i], y[:, path.j], b, lam)
    rank = int(np.count_nonzero(proj.correlations > RANK_EPS))
    if rank < b:
        keep = max(rank, 1)
        msg = f"only {rank} nonzero canonical correlations; shrinking b from {b} to {keep} for this iteration"
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
        notes.append(msg)
        proj = proj.truncated(keep)
    return proj


def ctw_align(x, y, cfg: CtwConfig = CtwConfig(),
              fixed_projections: Optional[ProjectionPair] = None,
              init_path: Optional[WarpingPath] = None) -> AlignmentResult:
    """Align ``x`` to ``y`` by alternating CCA and DTW.

    The trace holds the length-normalized projected cost after each DTW
    step. The returned path and projections are those of the lowest trace
    value. ``fixed_projections`` skips the CCA step (used to check that CTW
    with identity projections is plain DTW). ``init_path`` replaces the
    initial path otherwise computed from ``cfg.init`` (e.g. a DTW path the
    caller already has).
    """
    xm, ym = _as_matrix(x), _as_matrix(y)
    _check_pair(xm, ym)
    d = xm.shape[0]
    b = cfg.embedding_dim(d)
    if fixed_projections is None and b > d:
        raise ValueError(f"embedding dimension b={b} exceeds feature dimension d={d}")

    if init_path is not None:
        check_path(init_path, xm.shape[1], ym.shape[1])
        path = init_path
    elif cfg.init == "dtw":
        path = dtw_align(xm, ym).path
    else:
        path = uniform_init(xm.shape[1], ym.shape[1])

    notes: list = []
    trace: list = []
    best = None
    converged = False
    for it in range(cfg.max_iter):
        proj = fixed_projections if fixed_projections is not None else _fit_projection(
            xm, ym, path, b, cfg.lam, notes)
        res = dtw_align(project(xm, "source", proj), project(ym, "target", proj))
        new_path = res.path
        obj = res.raw_cost / new_path.m
        trace.append(obj)
        logger.debug("ctw iter %d: objective %.6g, path length %d", it, obj, new_path.m)
        if best is None or obj < best[0]:
            best = (obj, new_path, proj, it, res.raw_cost)
        stalled = new_path == path
        path = new_path
        if it > 0:
            prev = trace[-2]
            if stalled or abs(prev - obj) <= cfg.tol * max(abs(prev), 1e-12):
                converged = True
                break

    obj, best_path, best_proj, best_it, raw = best
    return AlignmentResult(path=best_path, final_cost=obj, objective_trace=tuple(trace),
                           projections=best_proj, raw_cost=raw, normalized_cost=obj,
                           n_iter=len(trace), converged=converged, best_iter=best_it,
                           warnings=tuple(notes))
