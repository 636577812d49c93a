import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_path
from oracles import path_error
from singalign.benchmark import (LINEAR_RATES, SHIFTS, DistortionSpec, ExperimentConfig, WarpMap,
                                 alignment_error, distort, gt_path_from_warp, make_case, run_experiment,
                                 results_to_plot_rows, song_controls, synth_song)
from singalign.core import InvalidPathError, WarpingPath, validate_path
from singalign.features import f0_contour, hop_samples, n_frames

HOP = 0.005


def P(pairs):
    return WarpingPath.from_pairs(pairs)


# -- error measure --------------------------------------------------------------

def test_hand_case_is_three_sevenths():
    est = P([(0, 0), (1, 1), (2, 2)])
    gt = P([(0, 0), (1, 0), (2, 1), (2, 2)])
    assert path_error(est, gt) == pytest.approx(3 / 7, abs=1e-15)
    assert alignment_error(est, gt) == pytest.approx(3 / 7, abs=1e-12)


@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_error_matches_oracle_and_is_symmetric(n_x, n_y, seed):
    rng = np.random.default_rng(seed)
    a = P(random_path(rng, n_x, n_y))
    b = P(random_path(rng, n_x, n_y))
    e = alignment_error(a, b)
    assert e == pytest.approx(path_error(a, b), abs=1e-12)
    assert e == pytest.approx(alignment_error(b, a), abs=1e-15)
    assert alignment_error(a, a) == 0.0
    assert e >= 0 and (e == 0) == (set(a.to_list()) == set(b.to_list()))


def test_error_extent_mismatch():
    with pytest.raises(InvalidPathError):
        alignment_error(P([(0, 0), (1, 1)]), P([(0, 0), (1, 1), (2, 2)]))


# -- ground-truth paths ------------------------------------------------------------

def test_identity_warp_gives_diagonal():
    tau = WarpMap.from_rates(1.0, [1.0])
    assert gt_path_from_warp(tau, 50, 50, HOP) == P([(k, k) for k in range(50)])


def test_linear_rate_path_shape():
    n_x = 201
    tau = WarpMap.from_rates((n_x - 1) * HOP, [1.2])
    n_y = int(round(tau.target_duration / HOP)) + 1
    p = gt_path_from_warp(tau, n_x, n_y, HOP)
    assert validate_path(p, n_x, n_y)
    # target index tracks source index / 1.2
    for i, j in p.to_list():
        assert abs(j - i / 1.2) <= 1.0


def test_five_chunk_path_changes_slope_at_boundaries():
    rates = (0.93, 1.08, 0.94, 0.80, 1.06)
    n_x = 1001
    tau = WarpMap.from_rates((n_x - 1) * HOP, rates)
    n_y = int(round(tau.target_duration / HOP)) + 1
    p = gt_path_from_warp(tau, n_x, n_y, HOP)
    assert validate_path(p, n_x, n_y)
    bounds = np.linspace(0, n_x - 1, 6).astype(int)
    last_j = np.array([p.j[p.i == b].max() for b in bounds])
    slopes = np.diff(last_j) / np.diff(bounds)
    np.testing.assert_allclose(slopes, 1 / np.array(rates), atol=0.01)


def test_non_monotone_warp_rejected():
    with pytest.raises(InvalidPathError):
        gt_path_from_warp(lambda t: -t, 5, 5, HOP)


# -- synthesis and distortion --------------------------------------------------------

def test_synth_is_deterministic():
    a, _ = synth_song(11, 3.0)
    b, _ = synth_song(11, 3.0)
    assert a.samples.tobytes() == b.samples.tobytes()
    assert np.max(np.abs(a.samples)) <= 1.0


def test_song_has_rests_near_ten_percent():
    c = song_controls(5, 30.0)
    t = np.arange(0, 30, HOP)
    silent = np.mean(c.f0_at(t) == 0)
    assert 0.04 < silent < 0.2
    assert c.midi.min() >= 55 and c.midi.max() <= 76
    assert np.all((c.durations >= 0.3 - 1e-9) & (c.durations <= 1.0 + 1e-9) | (c.offsets >= 29.8))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_tracker_follows_control_curve(seed):
    sig, c = synth_song(seed, 6.0)
    f0 = f0_contour(sig)
    truth = c.f0_at(f0.times())
    both = (f0.f0_hz > 0) & (truth > 0)
    assert abs(np.median(f0.f0_hz[both] / truth[both]) - 1) < 0.02
    assert np.mean(np.abs(f0.f0_hz[both] / truth[both] - 1) < 0.02) > 0.9
    # rest frames well inside a gap are reported unvoiced
    gap = (c.f0_at(f0.times() - 0.03) == 0) & (c.f0_at(f0.times() + 0.03) == 0) & (truth == 0)
    assert np.mean(f0.f0_hz[gap] == 0) >= 0.9


def test_identity_distortion_reproduces_source():
    sig, c = synth_song(4, 3.0)
    tgt, tau = distort(c, DistortionSpec(1.0, 0, "mono_to_mono"))
    assert tgt.samples.tobytes() == sig.samples.tobytes()
    assert tau.is_identity


def test_stretch_duration():
    sig, c = synth_song(4, 3.0)
    tgt, _ = distort(c, DistortionSpec(1.2, 0))
    assert abs(tgt.duration - sig.duration / 1.2) <= HOP


def test_shift_scales_f0():
    sig, c = synth_song(8, 4.0)
    tgt, tau = distort(c, DistortionSpec(1.1, 2))
    fs, ft = f0_contour(sig), f0_contour(tgt)
    j = np.rint(tau(fs.times()) / HOP).astype(int)
    ok = (j < ft.n)
    a, b = fs.f0_hz[ok], ft.f0_hz[j[ok]]
    v = (a > 0) & (b > 0)
    assert np.median(b[v] / a[v]) == pytest.approx(2 ** (2 / 12), rel=0.01)


def test_poly_mix_only_changes_target():
    sig, c = synth_song(2, 3.0)
    mono, _ = distort(c, DistortionSpec(1.0, 0, "mono_to_mono", seed=2))
    poly, _ = distort(c, DistortionSpec(1.0, 0, "mono_to_poly", seed=2))
    extra = poly.samples - mono.samples
    ratio_db = 20 * np.log10(np.sqrt(np.mean(extra ** 2)) / np.sqrt(np.mean(mono.samples ** 2)))
    # pad at -10 dB plus noise at -26 dB
    assert ratio_db == pytest.approx(10 * np.log10(10 ** -1 + 10 ** -2.6), abs=0.5)


@pytest.mark.parametrize("bad", [dict(stretch=0.3), dict(stretch=(1.0, 1.0)), dict(shift_semitones=13),
                                 dict(shift_semitones=1.5), dict(task="poly")])
def test_spec_validation(bad):
    with pytest.raises(ValueError):
        DistortionSpec(**bad)


def test_case_gt_is_valid():
    case = make_case(3, DistortionSpec((0.9, 1.1, 1.0, 0.85, 1.15), 1, "mono_to_poly", 3), duration_s=3.0)
    assert validate_path(case.gt_path, case.source_features.n, case.target_features.n)
    assert case.source_features.d == 25
    assert case.source_f0.n == case.source_features.n
    assert case.source_features.n == n_frames(48000, hop_samples(HOP, 16000))


# -- experiment runner ------------------------------------------------------------

def test_grid_shape_and_determinism():
    cfg = ExperimentConfig(scenario="linear", tasks=("mono_to_mono",), methods=("dtw",),
                           n_songs=2, duration_s=2.5, seed=7)
    a = run_experiment(cfg, workers=1)
    assert len(a) == len(LINEAR_RATES) * len(SHIFTS)
    assert sorted({c.r for c in a}) == list(LINEAR_RATES)
    b = run_experiment(cfg, workers=1)
    assert json.dumps([c.to_dict() for c in a]) == json.dumps([c.to_dict() for c in b])
    ident = [c for c in a if c.r == 1.0 and c.s == 0][0]
    assert ident.median_e == 0.0
    assert all(c.failed == 0 for c in a)
    rows = results_to_plot_rows(a)
    assert rows[0][:3] == ("linear", "mono_to_mono", "dtw")


def test_nonlinear_grid_has_shift_columns_and_rates():
    cfg = ExperimentConfig(scenario="nonlinear", tasks=("mono_to_poly",), methods=("dtw", "ctw_uniform"),
                           shifts=(0, 2), n_songs=1, duration_s=2.5, seed=1, ctw_max_iter=3)
    res = run_experiment(cfg, workers=1)
    assert {(c.method, c.s) for c in res} == set(itertools.product(("dtw", "ctw_uniform"), (0, 2)))
    for c in res:
        assert "r" not in c.to_dict()
        assert len(c.rates[0]) == 5 and all(0.8 <= r <= 1.2 for r in c.rates[0])
        assert c.rates[0] == list(cfg.chunk_rates(0))


def test_failed_cases_are_flagged_not_fatal(monkeypatch):
    import singalign.benchmark as bm

    def boom(*a, **k):
        raise RuntimeError("synthetic failure")
    monkeypatch.setattr(bm, "_align_all", boom)
    cfg = ExperimentConfig(rates=(1.0,), shifts=(0,), tasks=("mono_to_mono",), n_songs=1, duration_s=2.5)
    res = run_experiment(cfg, workers=1)
    assert all(c.failed == 1 and c.median_e is None for c in res)
    assert "synthetic failure" in res[0].failures[0]["error"]


def test_parallel_equals_serial():
    cfg = ExperimentConfig(rates=(1.1,), shifts=(1,), tasks=("mono_to_mono",), methods=("dtw",),
                           n_songs=2, duration_s=2.5, seed=3)
    a = [c.to_dict() for c in run_experiment(cfg, workers=1)]
    b = [c.to_dict() for c in run_experiment(cfg, workers=2)]
    assert a == b
