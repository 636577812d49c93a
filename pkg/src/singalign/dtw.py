"""Exact DTW under the step set {(1,0), (0,1), (1,1)} with squared Euclidean cost.

The forward pass keeps two rows of accumulated cost and an ``int8`` table of
back-pointers, so memory is ``O(n_x * n_y)`` bytes rather than doubles. Local
distances are computed inside the loop; the full cost matrix is only built by
:func:`cost_matrix` for inspection and tests.
"""

from __future__ import annotations

from math import comb
from typing import Optional

import numba as nb
import numpy as np

from .core import (AlignmentError, AlignmentResult, DimensionMismatchError, FeatureSequence,
                   WarpingPath, check_path)

BRUTE_FORCE_MAX_CELLS = 100


class SizeGuardError(AlignmentError):
    pass


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, FeatureSequence):
        return x.data
    a = np.asarray(x, dtype=np.float64)
    return a[None, :] if a.ndim == 1 else a


def _check_pair(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatchError(f"feature dimension mismatch: source d={x.shape[0]}, target d={y.shape[0]}")
    if x.shape[1] < 1 or y.shape[1] < 1:
        raise DimensionMismatchError("cannot align an empty sequence")


def cost_matrix(x, y) -> np.ndarray:
    """Squared Euclidean distance between every source frame and every target frame."""
    x, y = _as_matrix(x), _as_matrix(y)
    _check_pair(x, y)
    diff = x[:, :, None] - y[:, None, :]
    return np.einsum("dij,dij->ij", diff, diff)


@nb.njit(cache=True, nogil=True)
def _forward(x, y, band):
    d, nx = x.shape
    ny = y.shape[1]
    xt = np.ascontiguousarray(x.T)
    yt = np.ascontiguousarray(y.T)
    # back-pointers: 0 = (i-1, j-1), 1 = (i-1, j), 2 = (i, j-1), -1 = unreachable
    back = np.full((nx, ny), -1, dtype=np.int8)
    prev = np.full(ny, np.inf)
    cur = np.full(ny, np.inf)
    # band is applied on the diagonal rescaled to the rectangle
    slope = (ny - 1) / (nx - 1) if nx > 1 else 0.0
    for i in range(nx):
        if band >= 0:
            centre = i * slope
            lo = max(0, int(np.floor(centre - band)))
            hi = min(ny - 1, int(np.ceil(centre + band)))
        else:
            lo = 0
            hi = ny - 1
        for j in range(ny):
            cur[j] = np.inf
        for j in range(lo, hi + 1):
            acc = 0.0
            for k in range(d):
                t = xt[i, k] - yt[j, k]
                acc += t * t
            if i == 0 and j == 0:
                cur[j] = acc
                continue
            best = np.inf
            code = -1
            if i > 0 and j > 0 and prev[j - 1] < best:
                best = prev[j - 1]
                code = 0
            if i > 0 and prev[j] < best:
                best = prev[j]
                code = 1
            if j > 0 and cur[j - 1] < best:
                best = cur[j - 1]
                code = 2
            if code >= 0:
                cur[j] = acc + best
                back[i, j] = code
        for j in range(ny):
            prev[j] = cur[j]
    return prev[ny - 1], back


@nb.njit(cache=True)
def _backtrack(back):
    nx, ny = back.shape
    i = nx - 1
    j = ny - 1
    out = np.empty((nx + ny - 1, 2), dtype=np.int64)
    k = 0
    out[k, 0] = i
    out[k, 1] = j
    while i > 0 or j > 0:
        code = back[i, j]
        if code == 0:
            i -= 1
            j -= 1
        elif code == 1:
            i -= 1
        elif code == 2:
            j -= 1
        else:
            return out[:0]
        k += 1
        out[k, 0] = i
        out[k, 1] = j
    return out[: k + 1][::-1].copy()


def dtw_align(x, y, band: Optional[float] = None) -> AlignmentResult:
    """Minimum-cost warping path between ``x`` and ``y`` (``d x n`` each).

    Ties are broken towards the diagonal predecessor, then ``(i-1, j)``,
    then ``(i, j-1)``. ``band`` is an optional Sakoe-Chiba radius in target
    frames around the rescaled diagonal; ``None`` disables it.
    """
    xm, ym = _as_matrix(x), _as_matrix(y)
    _check_pair(xm, ym)
    total, back = _forward(np.ascontiguousarray(xm), np.ascontiguousarray(ym),
                           -1.0 if band is None else float(band))
    if not np.isfinite(total):
        raise AlignmentError(f"no feasible path inside Sakoe-Chiba band of radius {band}")
    path = WarpingPath(_backtrack(back))
    total = float(total)
    return AlignmentResult(path=path, final_cost=total, objective_trace=(total,),
                           raw_cost=total, normalized_cost=total / path.m)


def enumerate_paths(n_x: int, n_y: int):
    """Yield every valid warping path on an ``n_x x n_y`` grid as a list of pairs."""
    def rec(prefix):
        i, j = prefix[-1]
        if i == n_x - 1 and j == n_y - 1:
            yield list(prefix)
            return
        for di, dj in ((1, 1), (1, 0), (0, 1)):
            ni, nj = i + di, j + dj
            if ni < n_x and nj < n_y:
                prefix.append((ni, nj))
                yield from rec(prefix)
                prefix.pop()
    yield from rec([(0, 0)])


def dtw_brute(x, y) -> AlignmentResult:
    """Exhaustive search over all valid paths; a test oracle for tiny inputs."""
    xm, ym = _as_matrix(x), _as_matrix(y)
    _check_pair(xm, ym)
    n_x, n_y = xm.shape[1], ym.shape[1]
    if n_x * n_y > BRUTE_FORCE_MAX_CELLS:
        raise SizeGuardError(f"brute-force DTW refused for {n_x}x{n_y} > {BRUTE_FORCE_MAX_CELLS} cells")
    c = cost_matrix(xm, ym).tolist()
    best = [np.inf, None]
    prefix = [(0, 0)]

    def visit(i, j, acc):
        if i == n_x - 1 and j == n_y - 1:
            if acc < best[0]:
                best[0], best[1] = acc, list(prefix)
            return
        for ni, nj in ((i + 1, j + 1), (i + 1, j), (i, j + 1)):
            if ni < n_x and nj < n_y:
                prefix.append((ni, nj))
                visit(ni, nj, acc + c[ni][nj])
                prefix.pop()

    visit(0, 0, c[0][0])
    best, best_path = best
    path = WarpingPath.from_pairs(best_path)
    return AlignmentResult(path=path, final_cost=best, objective_trace=(best,),
                           raw_cost=best, normalized_cost=best / path.m)


def score_path(x, y, path: WarpingPath) -> float:
    """Accumulated squared distance along ``path`` without building the cost matrix."""
    xm, ym = _as_matrix(x), _as_matrix(y)
    _check_pair(xm, ym)
    check_path(path, xm.shape[1], ym.shape[1])
    diff = xm[:, path.i] - ym[:, path.j]
    return float(np.einsum("ij,ij->", diff, diff))


def count_paths(n_x: int, n_y: int) -> int:
    """Delannoy number D(n_x-1, n_y-1): the number of valid paths."""
    a, b = n_x - 1, n_y - 1
    return sum(2 ** k * comb(a, k) * comb(b, k) for k in range(min(a, b) + 1))


__all__ = ["cost_matrix", "dtw_align", "dtw_brute", "enumerate_paths", "score_path",
           "count_paths", "SizeGuardError", "BRUTE_FORCE_MAX_CELLS"]
