import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_path
from oracles import remap_loop
from singalign.core import InvalidPathError, WarpingPath
from singalign.features import PitchContour
from singalign.remap import remap_f0


def pc(vals):
    return PitchContour(np.asarray(vals, dtype=float))


def P(pairs):
    return WarpingPath.from_pairs(pairs)


def test_duplicate_rule():
    out = remap_f0(pc([1, 1, 1]), pc([200, 300]), P([(0, 0), (1, 0), (2, 1)]))
    assert out.f0_hz.tolist() == [200, 200, 300]


def test_voiced_mean_skips_zeros():
    out = remap_f0(pc([1, 1]), pc([200, 0, 220]), P([(0, 0), (0, 1), (1, 2)]))
    assert out.f0_hz.tolist() == [200, 220]


def test_all_unvoiced_group_is_zero():
    out = remap_f0(pc([1, 1]), pc([0, 0, 220]), P([(0, 0), (0, 1), (1, 2)]))
    assert out.f0_hz.tolist() == [0, 220]


def test_identity_path():
    tgt = pc([0, 110, 111.5, 0, 300])
    out = remap_f0(pc(np.ones(5)), tgt, P([(k, k) for k in range(5)]))
    np.testing.assert_array_equal(out.f0_hz, tgt.f0_hz)


def test_log_domain_is_geometric_mean():
    out = remap_f0(pc([1]), pc([100, 400]), P([(0, 0), (0, 1)]), log_domain=True)
    assert out.f0_hz[0] == pytest.approx(200.0)


def test_source_voicing_mask():
    out = remap_f0(pc([0, 150]), pc([200, 220]), P([(0, 0), (1, 1)]), mask_source_voicing=True)
    assert out.f0_hz.tolist() == [0, 220]


def test_median3_removes_spike_but_keeps_voicing():
    tgt = [0, 200, 200, 400, 200, 200, 0]
    out = remap_f0(pc(np.ones(7)), pc(tgt), P([(k, k) for k in range(7)]), median3=True)
    assert out.f0_hz.tolist() == [0, 200, 200, 200, 200, 200, 0]


def test_extent_mismatch():
    with pytest.raises(InvalidPathError):
        remap_f0(pc([1, 1, 1]), pc([200, 300]), P([(0, 0), (1, 1)]))


@given(st.integers(1, 15), st.integers(1, 15), st.integers(0, 2**32 - 1))
def test_matches_reference_loop(n_x, n_y, seed):
    rng = np.random.default_rng(seed)
    tgt = np.where(rng.random(n_y) < 0.3, 0.0, rng.uniform(80, 500, n_y))
    pairs = random_path(rng, n_x, n_y)
    out = remap_f0(pc(np.ones(n_x)), pc(tgt), P(pairs))
    assert out.n == n_x
    np.testing.assert_allclose(out.f0_hz, remap_loop(tgt, pairs, n_x), rtol=1e-12)
    v = out.f0_hz[out.f0_hz > 0]
    if v.size:
        assert v.min() >= tgt[tgt > 0].min() - 1e-9 and v.max() <= tgt.max() + 1e-9
