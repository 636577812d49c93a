"""Canonical time warping and DTW for aligning singing recordings."""

from .core import (AlignmentError, AlignmentResult, DimensionMismatchError, FeatureSequence,
                   InvalidPathError, PathVerdict, WarpingPath, path_to_selection_matrices,
                   validate_path)
from .dtw import cost_matrix, dtw_align, dtw_brute

__version__ = "0.1.0"
