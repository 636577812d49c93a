"""Regularized CCA on column-paired data via whitening and SVD."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import AlignmentError, DimensionMismatchError, FeatureSequence

# relative eigenvalue floor under which an unregularized covariance is singular
SINGULAR_RTOL = 1e-12
DEFAULT_RIDGE_SCALE = 1e-4


class InsufficientDataError(AlignmentError, ValueError):
    pass


class SingularCovarianceError(AlignmentError, np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class ProjectionPair:
    """Paired projections ``V_x`` (``d_x x b``) and ``V_y`` (``d_y x b``).

    ``correlations`` are the canonical correlations in descending order.
    ``reg_x`` and ``reg_y`` are the ridge terms that were added to each
    auto-covariance before whitening.
    """

    v_x: np.ndarray
    v_y: np.ndarray
    correlations: np.ndarray
    mean_x: np.ndarray
    mean_y: np.ndarray
    reg_x: float = 0.0
    reg_y: float = 0.0

    def __post_init__(self):
        for name in ("v_x", "v_y", "correlations", "mean_x", "mean_y"):
            a = np.array(getattr(self, name), dtype=np.float64)
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        if self.v_x.ndim != 2 or self.v_y.ndim != 2 or self.v_x.shape[1] != self.v_y.shape[1]:
            raise DimensionMismatchError(f"projection shapes disagree: {self.v_x.shape} vs {self.v_y.shape}")
        if self.mean_x.shape != (self.v_x.shape[0],) or self.mean_y.shape != (self.v_y.shape[0],):
            raise DimensionMismatchError("projection means do not match projection row counts")

    @property
    def b(self) -> int:
        return self.v_x.shape[1]

    @property
    def d(self) -> int:
        return self.v_x.shape[0]

    @classmethod
    def identity(cls, d: int) -> "ProjectionPair":
        """Identity projections with zero means; CTW with these is plain DTW."""
        eye = np.eye(d)
        return cls(eye, eye, np.ones(d), np.zeros(d), np.zeros(d))

    def truncated(self, b: int) -> "ProjectionPair":
        return ProjectionPair(self.v_x[:, :b], self.v_y[:, :b], self.correlations[:b],
                              self.mean_x, self.mean_y, self.reg_x, self.reg_y)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "b": self.b,
            "lambda_x": float(self.reg_x),
            "lambda_y": float(self.reg_y),
            "correlations": self.correlations.tolist(),
            "mean_x": self.mean_x.tolist(),
            "mean_y": self.mean_y.tolist(),
            "V_x": self.v_x.tolist(),
            "V_y": self.v_y.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ProjectionPair":
        return cls(np.array(obj["V_x"]), np.array(obj["V_y"]), np.array(obj["correlations"]),
                   np.array(obj["mean_x"]), np.array(obj["mean_y"]),
                   obj.get("lambda_x", 0.0), obj.get("lambda_y", 0.0))


def default_ridge(cov: np.ndarray) -> float:
    return DEFAULT_RIDGE_SCALE * float(np.trace(cov)) / cov.shape[0]


def _inv_sqrt(cov: np.ndarray, reg: float, block: str) -> np.ndarray:
    c = cov + reg * np.eye(cov.shape[0])
    w, q = np.linalg.eigh(c)
    top = max(float(w[-1]), 0.0)
    if w[0] <= SINGULAR_RTOL * top or top == 0.0:
        if reg == 0.0:
            raise SingularCovarianceError(
                f"{block} covariance is numerically singular (min eigenvalue {w[0]:.3g}); "
                "pass a positive regularization lambda")
        raise SingularCovarianceError(f"{block} covariance is singular even with lambda={reg:g}")
    return (q / np.sqrt(w)) @ q.T


def cca_fit(paired_x, paired_y, b: int, lam: Optional[float] = None) -> ProjectionPair:
    """Fit ``b`` canonical directions to column-paired ``paired_x`` / ``paired_y``.

    With ``lam=None`` each block gets a ridge of ``1e-4 * trace(C)/d`` of its
    own covariance ``C``; otherwise ``lam`` is added to both. Columns of
    ``V_x`` are signed so their first non-negligible entry is positive, and
    the matching ``V_y`` column is flipped with it.
    """
    x = np.asarray(paired_x, dtype=np.float64)
    y = np.asarray(paired_y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2:
        raise DimensionMismatchError("paired data must be 2-D (d x m)")
    if x.shape[1] != y.shape[1]:
        raise DimensionMismatchError(f"paired data have different column counts: {x.shape[1]} vs {y.shape[1]}")
    m = x.shape[1]
    if m < 2:
        raise InsufficientDataError(f"CCA needs at least 2 paired frames, got {m}")
    if b < 1 or b > min(x.shape[0], y.shape[0]):
        raise ValueError(f"embedding dimension b={b} must satisfy 1 <= b <= d={min(x.shape[0], y.shape[0])}")
    if lam is not None and lam < 0:
        raise ValueError(f"regularization must be nonnegative, got {lam}")

    mean_x, mean_y = x.mean(axis=1), y.mean(axis=1)
    xc = x - mean_x[:, None]
    yc = y - mean_y[:, None]
    cxx = xc @ xc.T / m
    cyy = yc @ yc.T / m
    cxy = xc @ yc.T / m

    reg_x = default_ridge(cxx) if lam is None else float(lam)
    reg_y = default_ridge(cyy) if lam is None else float(lam)
    kx = _inv_sqrt(cxx, reg_x, "source")
    ky = _inv_sqrt(cyy, reg_y, "target")

    u, s, vt = np.linalg.svd(kx @ cxy @ ky)
    v_x = kx @ u[:, :b]
    v_y = ky @ vt[:b].T

    for c in range(b):
        col = v_x[:, c]
        nz = np.nonzero(np.abs(col) > 1e-12 * np.abs(col).max())[0]
        if nz.size and col[nz[0]] < 0:
            v_x[:, c] *= -1
            v_y[:, c] *= -1

    corr = np.clip(s[:b], -1.0, 1.0)
    return ProjectionPair(v_x, v_y, corr, mean_x, mean_y, reg_x, reg_y)


def regularized_covariances(paired_x, paired_y, proj: ProjectionPair):
    """Centered auto-covariances of the pair with the projection's ridge terms folded in."""
    x = np.asarray(paired_x, dtype=np.float64)
    y = np.asarray(paired_y, dtype=np.float64)
    m = x.shape[1]
    xc = x - x.mean(axis=1, keepdims=True)
    yc = y - y.mean(axis=1, keepdims=True)
    cxx = xc @ xc.T / m + proj.reg_x * np.eye(x.shape[0])
    cyy = yc @ yc.T / m + proj.reg_y * np.eye(y.shape[0])
    return cxx, cyy


def project(seq, side: str, proj: ProjectionPair):
    """``V^T (seq - mean)`` for the chosen side (``"source"`` or ``"target"``).

    Accepts a :class:`FeatureSequence` (and returns one) or a bare matrix.
    """
    if side not in ("source", "target"):
        raise ValueError(f"side must be 'source' or 'target', got {side!r}")
    v, mu = (proj.v_x, proj.mean_x) if side == "source" else (proj.v_y, proj.mean_y)
    data = seq.data if isinstance(seq, FeatureSequence) else np.asarray(seq, dtype=np.float64)
    if data.shape[0] != v.shape[0]:
        raise DimensionMismatchError(f"{side} sequence has d={data.shape[0]}, projection expects d={v.shape[0]}")
    out = v.T @ (data - mu[:, None])
    if isinstance(seq, FeatureSequence):
        return seq.with_data(out)
    return out
