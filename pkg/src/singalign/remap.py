"""Warp a target F0 contour onto source timing along an alignment path."""

from __future__ import annotations

import numpy as np
from scipy.signal import medfilt

from .core import InvalidPathError, WarpingPath, check_path
from .features import PitchContour


def remap_f0(source_f0: PitchContour, target_f0: PitchContour, path: WarpingPath,
             log_domain: bool = False, median3: bool = False,
             mask_source_voicing: bool = False) -> PitchContour:
    """Corrected F0 with the source's length and the target's pitch.

    Each source frame ``i`` takes the mean of the voiced target values paired
    with it (a target frame paired with several source frames is duplicated);
    if all of them are unvoiced the frame is unvoiced. ``log_domain`` averages
    in log-Hz, ``median3`` applies a 3-frame median over voiced runs, and
    ``mask_source_voicing`` zeroes frames that are unvoiced in the source.
    """
    n_x, n_y = source_f0.n, target_f0.n
    if path.m and (path.i.max() != n_x - 1 or path.j.max() != n_y - 1):
        raise InvalidPathError(
            f"path extents ({path.i.max() + 1}, {path.j.max() + 1}) do not match contour lengths ({n_x}, {n_y})")
    check_path(path, n_x, n_y)

    tgt = target_f0.f0_hz[path.j]
    voiced = tgt > 0
    vals = np.log(np.where(voiced, tgt, 1.0)) if log_domain else tgt
    total = np.bincount(path.i, weights=np.where(voiced, vals, 0.0), minlength=n_x)
    count = np.bincount(path.i, weights=voiced.astype(np.float64), minlength=n_x)
    out = np.zeros(n_x)
    has = count > 0
    out[has] = total[has] / count[has]
    if log_domain:
        out[has] = np.exp(out[has])

    if median3:
        smoothed = medfilt(out, 3)
        # only smooth inside voiced runs so voicing boundaries are untouched
        keep = has & (smoothed > 0)
        out[keep] = smoothed[keep]
    if mask_source_voicing:
        out[~source_f0.voiced] = 0.0
    return PitchContour(out, source_f0.hop_seconds)
