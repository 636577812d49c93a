"""On-disk formats: path CSV, binary/CSV feature files, F0 CSV, JSON reports."""

from __future__ import annotations

import csv
import io
import json
import struct
from pathlib import Path

import numpy as np

from .core import FeatureFormatError, FeatureSequence, WarpingPath
from .features import PitchContour

FEATURE_MAGIC = b"WARPFEAT"
FEATURE_VERSION = 1
_HEADER = struct.Struct("<8sBIIdI")


# -- warping path ------------------------------------------------------------

def format_path_csv(path: WarpingPath) -> str:
    buf = io.StringIO()
    buf.write("i,j\n")
    for i, j in path.pairs.tolist():
        buf.write(f"{i},{j}\n")
    return buf.getvalue()


def write_path_csv(fname, path: WarpingPath) -> None:
    Path(fname).write_text(format_path_csv(path))


def read_path_csv(fname) -> WarpingPath:
    with open(fname, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["i", "j"]:
        raise FeatureFormatError(f"{fname}: path CSV must start with header 'i,j'")
    pairs = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise FeatureFormatError(f"{fname}:{lineno}: expected 2 columns, got {len(row)}")
        try:
            pairs.append((int(row[0]), int(row[1])))
        except ValueError:
            raise FeatureFormatError(f"{fname}:{lineno}: non-integer index in {row}") from None
    return WarpingPath(np.array(pairs, dtype=np.int64).reshape(-1, 2))


# -- feature files -----------------------------------------------------------

def encode_features(seq: FeatureSequence) -> bytes:
    header = _HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, seq.d, seq.n, float(seq.hop_seconds),
                          int(seq.sample_rate))
    return header + np.ascontiguousarray(seq.data.T, dtype="<f4").tobytes()


def decode_features(blob: bytes, label: str = "") -> FeatureSequence:
    if len(blob) < _HEADER.size:
        raise FeatureFormatError("feature file truncated before end of header")
    magic, version, d, n, hop, sr = _HEADER.unpack_from(blob)
    if magic != FEATURE_MAGIC:
        raise FeatureFormatError(f"bad magic {magic!r}; expected {FEATURE_MAGIC!r}")
    if version != FEATURE_VERSION:
        raise FeatureFormatError(f"unsupported feature file version {version}")
    expected = d * n * 4
    body = blob[_HEADER.size:]
    if len(body) != expected:
        raise FeatureFormatError(f"feature payload is {len(body)} bytes, header implies {expected}")
    data = np.frombuffer(body, dtype="<f4").reshape(n, d).T.astype(np.float64)
    return FeatureSequence(data, hop, sr, label)


def write_features(fname, seq: FeatureSequence, fmt: str = "bin") -> None:
    """``bin``: WARPFEAT binary. ``csv``: one frame per row plus a ``.json`` sidecar."""
    fname = Path(fname)
    if fmt == "bin":
        fname.write_bytes(encode_features(seq))
    elif fmt == "csv":
        np.savetxt(fname, seq.data.T, delimiter=",", fmt="%.9g")
        sidecar = {"d": seq.d, "n": seq.n, "hop_seconds": seq.hop_seconds,
                   "sample_rate": seq.sample_rate, "label": seq.label}
        _sidecar(fname).write_text(json.dumps(sidecar, indent=2) + "\n")
    else:
        raise ValueError(f"unknown feature format {fmt!r} (expected 'bin' or 'csv')")


def _sidecar(fname: Path) -> Path:
    return fname.with_name(fname.name + ".json")


def read_features(fname) -> FeatureSequence:
    """Read either feature format, sniffing the binary magic."""
    fname = Path(fname)
    blob = fname.read_bytes()
    if blob[:8] == FEATURE_MAGIC:
        return decode_features(blob, label=fname.stem)
    side = _sidecar(fname)
    if not side.exists():
        raise FeatureFormatError(f"{fname}: not a WARPFEAT file and no CSV sidecar {side.name}")
    meta = json.loads(side.read_text())
    try:
        data = np.loadtxt(fname, delimiter=",", ndmin=2).T
    except ValueError as exc:
        raise FeatureFormatError(f"{fname}: malformed feature CSV ({exc})") from None
    if data.shape != (meta["d"], meta["n"]):
        raise FeatureFormatError(f"{fname}: CSV shape {data.shape} disagrees with sidecar d={meta['d']}, n={meta['n']}")
    return FeatureSequence(data, meta["hop_seconds"], meta.get("sample_rate", 0), meta.get("label", fname.stem))


# -- F0 ----------------------------------------------------------------------

def write_f0_csv(fname, contour: PitchContour) -> None:
    t = contour.times()
    lines = ["time_s,f0_hz"] + [f"{a:.6f},{b:.6f}" for a, b in zip(t, contour.f0_hz)]
    Path(fname).write_text("\n".join(lines) + "\n")


def read_f0_csv(fname) -> PitchContour:
    with open(fname, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows or [c.strip() for c in rows[0]] != ["time_s", "f0_hz"]:
        raise FeatureFormatError(f"{fname}: F0 CSV must start with header 'time_s,f0_hz'")
    try:
        vals = np.array([[float(a), float(b)] for a, b in rows[1:]]).reshape(-1, 2)
    except ValueError:
        raise FeatureFormatError(f"{fname}: malformed F0 row") from None
    hop = float(vals[1, 0] - vals[0, 0]) if len(vals) > 1 else 0.005
    if hop <= 0:
        raise FeatureFormatError(f"{fname}: time column is not increasing")
    return PitchContour(vals[:, 1], hop)


def write_json(fname, obj) -> None:
    Path(fname).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
