import io
import struct
import wave

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.signal import sawtooth

from singalign.core import FeatureFormatError, FeatureSequence
from singalign.features import (AudioSignal, SignalTooShortError, UnsupportedFormatError,
                                cepstrum_from_mel_energies, extract_features, f0_contour, fit_pca,
                                mcep, mel_filterbank, pca_reduce, read_wav, resample_linear, stft_mag,
                                write_wav, znorm)

SR = 16000


def stdlib_wav(frames: np.ndarray, channels=1, sr=SR) -> bytes:
    """PCM16 WAV written by the standard library, as an independent encoder."""
    buf = io.BytesIO()
    with wave.open(buf, "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(2)
        w.setframerate(sr)
        w.writeframes(frames.astype("<i2").tobytes())
    return buf.getvalue()


def saw(f0, dur=1.0, sr=SR, amp=0.5):
    t = np.arange(int(dur * sr)) / sr
    return AudioSignal(amp * sawtooth(2 * np.pi * f0 * t), sr)


# -- WAV ----------------------------------------------------------------------

def test_square_wave_full_scale():
    sq = np.tile([32767, -32767], 50)
    sig = read_wav(stdlib_wav(sq))
    assert sig.sample_rate == SR
    np.testing.assert_array_equal(sig.samples, sq / 32768.0)


def test_stereo_antiphase_downmix_is_silent(rng):
    left = rng.integers(-20000, 20000, 200)
    inter = np.empty(400, dtype=np.int64)
    inter[0::2], inter[1::2] = left, -left
    assert np.all(read_wav(stdlib_wav(inter, channels=2)).samples == 0)


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=300), st.sampled_from(["PCM_16", "FLOAT"]))
def test_roundtrip_within_one_lsb(vals, subtype):
    sig = AudioSignal(np.array(vals), 22050)
    back = read_wav(write_wav(sig, subtype))
    assert back.sample_rate == 22050
    assert np.max(np.abs(back.samples - sig.samples)) <= 1 / 32768 + 1e-12


def test_unsupported_codec_is_named():
    blob = bytearray(stdlib_wav(np.zeros(10)))
    struct.pack_into("<H", blob, 20, 7)
    with pytest.raises(UnsupportedFormatError, match="mu-law"):
        read_wav(bytes(blob))


def test_malformed_header():
    with pytest.raises(FeatureFormatError):
        read_wav(b"RIFX0000WAVEjunk")


def test_resample_linear_length():
    sig = AudioSignal(np.zeros(44100), 44100)
    assert len(resample_linear(sig, SR)) == SR


# -- STFT / MCEP ----------------------------------------------------------------

def test_stft_shape_and_frame_count():
    sig = AudioSignal(np.random.default_rng(0).normal(size=SR) * 0.1, SR)
    spec = stft_mag(sig)
    assert spec.d == 513
    assert spec.n == SR // 80 + 1
    assert spec.hop_seconds == pytest.approx(0.005)


def test_stft_bin_centre_sine_leakage():
    k = 64
    t = np.arange(SR) / SR
    sig = AudioSignal(0.5 * np.sin(2 * np.pi * k * SR / 1024 * t), SR)
    frame = stft_mag(sig).data[:, 100]
    assert frame.argmax() == k
    far = np.delete(frame, np.arange(k - 2, k + 3))
    assert far.max() < 0.01 * frame[k]


def test_stft_silence_and_short():
    assert np.all(stft_mag(AudioSignal(np.zeros(4000), SR)).data == 0)
    with pytest.raises(SignalTooShortError):
        stft_mag(AudioSignal(np.zeros(1000), SR))


def test_mel_filterbank_shape_and_coverage():
    fb = mel_filterbank(SR)
    assert fb.shape == (40, 513)
    assert np.all(fb.max(axis=1) > 0.5)


def test_mcep_dimension():
    spec = stft_mag(saw(220, 0.5))
    assert mcep(spec).d == 25
    assert mcep(spec, drop_c0=True).d == 24


def test_white_mel_spectrum_has_only_c0():
    c = cepstrum_from_mel_energies(np.full((40, 3), 2.5))
    assert np.all(np.abs(c[0]) > 0)
    np.testing.assert_allclose(c[1:], 0.0, atol=1e-9)


def test_amplitude_doubling_shifts_only_c0():
    sig = saw(200, 0.5)
    a = mcep(stft_mag(sig)).data
    b = mcep(stft_mag(AudioSignal(2 * sig.samples, SR))).data
    diff = b - a
    np.testing.assert_allclose(diff[1:], 0.0, atol=1e-9)
    np.testing.assert_allclose(diff[0], diff[0, 0], atol=1e-9)
    # log(4) on each band energy, orthonormal DCT gain sqrt(40)
    assert diff[0, 0] == pytest.approx(np.log(4.0) * np.sqrt(40), rel=1e-9)


def test_mcep_dc_invariant():
    sig = saw(180, 0.5)
    a = mcep(stft_mag(sig)).data
    b = mcep(stft_mag(AudioSignal(sig.samples + 0.2, SR))).data
    np.testing.assert_allclose(a, b, atol=1e-6)


# -- F0 -------------------------------------------------------------------------

def test_sawtooth_220():
    f0 = f0_contour(saw(220))
    assert abs(np.median(f0.f0_hz[f0.voiced]) - 220.0) <= 1.0


def test_silence_is_unvoiced():
    assert np.all(f0_contour(AudioSignal(np.zeros(SR), SR)).f0_hz == 0)


def test_shift_ratio():
    ratio = 2 ** (2 / 12)
    a = f0_contour(saw(220)).f0_hz
    b = f0_contour(saw(220 * ratio)).f0_hz
    got = np.median(b[b > 0]) / np.median(a[a > 0])
    assert got == pytest.approx(ratio, rel=0.005)


@pytest.mark.parametrize("f", [90.0, 150.0, 330.0, 600.0])
def test_tracks_range(f):
    c = f0_contour(saw(f, 0.5))
    assert abs(np.median(c.f0_hz[c.voiced]) / f - 1) < 0.01


def test_frame_counts_agree():
    sig = saw(200, 0.73)
    assert f0_contour(sig).n == extract_features(sig).n


def test_f0_too_short():
    with pytest.raises(SignalTooShortError):
        f0_contour(AudioSignal(np.zeros(100), SR))


# -- PCA / normalization ----------------------------------------------------------

def test_pca_full_rank_is_rotation(rng):
    x = rng.normal(size=(6, 40))
    m = fit_pca(x, 6)
    np.testing.assert_allclose(m.inverse_transform(m.transform(x)), x, atol=1e-6)
    np.testing.assert_allclose(m.components @ m.components.T, np.eye(6), atol=1e-9)


def test_pca_two_dim_subspace(rng):
    basis = rng.normal(size=(5, 2))
    x = basis @ rng.normal(size=(2, 100)) + rng.normal(size=(5, 1))
    assert fit_pca(x, 2).explained_variance_ratio.sum() == pytest.approx(1.0, abs=1e-9)


def test_pca_reduce_decorrelates(rng):
    x = FeatureSequence(rng.normal(size=(8, 50)) * np.arange(1, 9)[:, None])
    y = FeatureSequence(rng.normal(size=(8, 30)))
    a, b = pca_reduce(x, y, 4)
    z = np.hstack([a.data, b.data])
    cov = np.cov(z, bias=True)
    assert np.abs(cov - np.diag(np.diag(cov))).max() < 1e-6
    with pytest.raises(ValueError):
        pca_reduce(x, y, 9)


def test_pca_on_real_stft():
    a = stft_mag(saw(220, 0.5))
    b = stft_mag(saw(247, 0.6))
    ra, rb = pca_reduce(a, b, 25)
    assert ra.d == rb.d == 25 and ra.n == a.n and rb.n == b.n
    assert np.all(np.isfinite(ra.data)) and np.all(np.isfinite(rb.data))


def test_znorm(rng):
    x = FeatureSequence(np.vstack([rng.normal(3, 5, 40), np.full(40, 2.0)]))
    z = znorm(x).data
    np.testing.assert_allclose(z.mean(axis=1), 0, atol=1e-12)
    assert z[0].std() == pytest.approx(1.0)
    assert np.all(z[1] == 0)
