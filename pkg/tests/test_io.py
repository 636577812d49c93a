import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from singalign import io as fio
from singalign.core import FeatureFormatError, FeatureSequence, WarpingPath
from singalign.features import PitchContour


def test_binary_layout_by_hand():
    seq = FeatureSequence(np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]), 0.005, 16000)
    blob = fio.encode_features(seq)
    assert blob[:8] == b"WARPFEAT"
    assert blob[8] == 1
    assert struct.unpack_from("<II", blob, 9) == (2, 3)
    assert struct.unpack_from("<d", blob, 17)[0] == 0.005
    assert struct.unpack_from("<I", blob, 25)[0] == 16000
    # frame-major: frame 0 = (1, 4), frame 1 = (2, 5), ...
    assert np.frombuffer(blob[29:], "<f4").tolist() == [1, 4, 2, 5, 3, 6]


@given(st.integers(1, 6), st.integers(1, 20), st.integers(0, 2**32 - 1))
def test_binary_roundtrip(d, n, seed):
    data = np.random.default_rng(seed).normal(size=(d, n))
    seq = FeatureSequence(data, 0.01, 22050, "x")
    back = fio.decode_features(fio.encode_features(seq))
    np.testing.assert_array_equal(back.data, data.astype(np.float32))
    assert (back.hop_seconds, back.sample_rate) == (0.01, 22050)


def test_csv_roundtrip_with_sidecar(tmp_path, rng):
    seq = FeatureSequence(rng.normal(size=(3, 7)), 0.005, 16000, "song")
    f = tmp_path / "a.csv"
    fio.write_features(f, seq, "csv")
    assert (tmp_path / "a.csv.json").exists()
    back = fio.read_features(f)
    np.testing.assert_allclose(back.data, seq.data, rtol=1e-8)
    assert back.label == "song" and back.sample_rate == 16000


def test_read_features_errors(tmp_path):
    bad = tmp_path / "bad.feat"
    bad.write_bytes(b"WARPFEAT" + b"\x01" + b"\x00" * 5)
    with pytest.raises(FeatureFormatError, match="truncated"):
        fio.read_features(bad)
    plain = tmp_path / "plain.csv"
    plain.write_text("1,2\n")
    with pytest.raises(FeatureFormatError, match="sidecar"):
        fio.read_features(plain)
    wrong = tmp_path / "wrong.feat"
    seq = FeatureSequence(np.ones((2, 2)))
    wrong.write_bytes(fio.encode_features(seq)[:-4])
    with pytest.raises(FeatureFormatError, match="payload"):
        fio.read_features(wrong)


def test_path_csv_roundtrip(tmp_path):
    p = WarpingPath.from_pairs([(0, 0), (1, 0), (2, 1)])
    f = tmp_path / "p.csv"
    fio.write_path_csv(f, p)
    assert f.read_text() == "i,j\n0,0\n1,0\n2,1\n"
    assert fio.read_path_csv(f) == p


def test_path_csv_errors(tmp_path):
    f = tmp_path / "p.csv"
    f.write_text("a,b\n0,0\n")
    with pytest.raises(FeatureFormatError, match="header"):
        fio.read_path_csv(f)
    f.write_text("i,j\n0,x\n")
    with pytest.raises(FeatureFormatError, match=":2"):
        fio.read_path_csv(f)


def test_f0_csv_roundtrip(tmp_path):
    c = PitchContour(np.array([0.0, 220.0, 221.5, 0.0]), 0.005)
    f = tmp_path / "f0.csv"
    fio.write_f0_csv(f, c)
    assert f.read_text().splitlines()[:2] == ["time_s,f0_hz", "0.000000,0.000000"]
    back = fio.read_f0_csv(f)
    np.testing.assert_allclose(back.f0_hz, c.f0_hz)
    assert back.hop_seconds == pytest.approx(0.005)
