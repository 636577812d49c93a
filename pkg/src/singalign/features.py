"""Audio front end: WAV I/O, STFT magnitudes, mel-cepstra, YIN F0 and PCA.

Defaults follow the analysis settings used for alignment: 1024-point FFT,
5 ms hop, order-24 mel-cepstrum (25 coefficients including c0).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.fft import dct

from .core import AlignmentError, DimensionMismatchError, FeatureFormatError, FeatureSequence

DEFAULT_SR = 16000
FFT_SIZE = 1024
HOP_SECONDS = 0.005
MCEP_ORDER = 24
N_MELS = 40
LOG_FLOOR = 1e-10
YIN_THRESHOLD = 0.15
# frames quieter than this RMS are reported unvoiced without running YIN
SILENCE_RMS = 1e-5


class UnsupportedFormatError(FeatureFormatError):
    pass


class SignalTooShortError(AlignmentError, ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AudioSignal:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1:
            raise ValueError(f"AudioSignal is mono; got samples with shape {s.shape}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True, eq=False)
class PitchContour:
    """Per-frame F0 in Hz; 0 marks an unvoiced frame."""

    f0_hz: np.ndarray
    hop_seconds: float = HOP_SECONDS

    def __post_init__(self):
        f = np.asarray(self.f0_hz, dtype=np.float64).ravel()
        if not np.all(np.isfinite(f)) or np.any(f < 0):
            raise ValueError("F0 values must be finite and nonnegative")
        f.flags.writeable = False
        object.__setattr__(self, "f0_hz", f)

    @property
    def n(self) -> int:
        return self.f0_hz.shape[0]

    @property
    def voiced(self) -> np.ndarray:
        return self.f0_hz > 0

    def times(self) -> np.ndarray:
        return np.arange(self.n) * self.hop_seconds

    def __len__(self):
        return self.n


# -- WAV ---------------------------------------------------------------------

_WAVE_FORMATS = {1: "PCM", 2: "MS ADPCM", 3: "IEEE float", 6: "A-law", 7: "mu-law",
                 0x11: "IMA ADPCM", 0x55: "MPEG Layer 3"}


def read_wav(data: bytes) -> AudioSignal:
    """Decode a RIFF/WAVE byte string (16-bit PCM or 32-bit float).

    Multi-channel audio is downmixed by averaging the channels.
    """
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise FeatureFormatError("not a RIFF/WAVE file (missing RIFF/WAVE header)")
    pos = 12
    fmt = None
    payload = None
    while pos + 8 <= len(data):
        cid, size = struct.unpack("<4sI", data[pos:pos + 8])
        body = data[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            if size < 16:
                raise FeatureFormatError(f"fmt chunk too short ({size} bytes)")
            fmt = struct.unpack("<HHIIHH", body[:16])
            if fmt[0] == 0xFFFE and size >= 26:
                fmt = (struct.unpack("<H", body[24:26])[0],) + fmt[1:]
        elif cid == b"data":
            payload = body
        pos += 8 + size + (size & 1)
    if fmt is None:
        raise FeatureFormatError("WAV file has no fmt chunk")
    if payload is None:
        raise FeatureFormatError("WAV file has no data chunk")
    tag, channels, sr, _, block_align, bits = fmt
    if channels < 1:
        raise FeatureFormatError(f"invalid channel count {channels}")
    if tag == 1 and bits == 16:
        x = np.frombuffer(payload[: len(payload) // 2 * 2], dtype="<i2").astype(np.float64) / 32768.0
    elif tag == 3 and bits == 32:
        x = np.frombuffer(payload[: len(payload) // 4 * 4], dtype="<f4").astype(np.float64)
    else:
        name = _WAVE_FORMATS.get(tag, f"format tag 0x{tag:04x}")
        raise UnsupportedFormatError(f"unsupported WAV codec: {name} {bits}-bit "
                                     "(supported: PCM 16-bit, IEEE float 32-bit)")
    x = x[: len(x) // channels * channels].reshape(-1, channels).mean(axis=1)
    return AudioSignal(x, sr)


def write_wav(sig: AudioSignal, subtype: str = "PCM_16") -> bytes:
    if subtype == "PCM_16":
        q = np.clip(np.round(sig.samples * 32768.0), -32768, 32767).astype("<i2")
        tag, bits = 1, 16
    elif subtype == "FLOAT":
        q = sig.samples.astype("<f4")
        tag, bits = 3, 32
    else:
        raise ValueError(f"subtype must be PCM_16 or FLOAT, got {subtype!r}")
    payload = q.tobytes()
    block = bits // 8
    fmt = struct.pack("<HHIIHH", tag, 1, sig.sample_rate, sig.sample_rate * block, block, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(payload)) + payload
    return b"RIFF" + struct.pack("<I", len(body)) + body


def load_wav(path) -> AudioSignal:
    with open(path, "rb") as fh:
        return read_wav(fh.read())


def save_wav(path, sig: AudioSignal, subtype: str = "PCM_16") -> None:
    with open(path, "wb") as fh:
        fh.write(write_wav(sig, subtype))


def resample_linear(sig: AudioSignal, sample_rate: int) -> AudioSignal:
    if sig.sample_rate == sample_rate:
        return sig
    n_out = int(round(len(sig) * sample_rate / sig.sample_rate))
    t_out = np.arange(n_out) / sample_rate
    t_in = np.arange(len(sig)) / sig.sample_rate
    return AudioSignal(np.interp(t_out, t_in, sig.samples), sample_rate)


# -- spectral features -------------------------------------------------------

def hop_samples(hop_seconds: float, sample_rate: int) -> int:
    h = int(round(hop_seconds * sample_rate))
    if h < 1:
        raise ValueError(f"hop of {hop_seconds}s is shorter than one sample at {sample_rate} Hz")
    return h


def n_frames(n_samples: int, hop: int) -> int:
    return n_samples // hop + 1


def _frames(x: np.ndarray, frame_len: int, hop: int, offset: int, n: int) -> np.ndarray:
    """``n`` frames of ``frame_len`` samples, frame ``t`` starting at ``t*hop + offset`` in ``x``."""
    idx = offset + hop * np.arange(n)[:, None] + np.arange(frame_len)[None, :]
    return x[idx]


def stft_mag(sig: AudioSignal, fft_size: int = FFT_SIZE, hop_seconds: float = HOP_SECONDS,
             remove_dc: bool = True) -> FeatureSequence:
    """Magnitude STFT, ``fft_size/2 + 1`` rows by ``floor(len/hop) + 1`` frames.

    Frames are centred on ``t*hop`` with reflection padding and a periodic
    Hann window. Each frame's mean is subtracted before windowing when
    ``remove_dc`` is set, which makes downstream features blind to a DC
    offset.
    """
    if fft_size < 2 or fft_size & (fft_size - 1):
        raise ValueError(f"fft_size must be a power of two, got {fft_size}")
    x = sig.samples
    if len(x) < fft_size:
        raise SignalTooShortError(f"signal has {len(x)} samples, fewer than fft_size={fft_size}")
    hop = hop_samples(hop_seconds, sig.sample_rate)
    n = n_frames(len(x), hop)
    half = fft_size // 2
    padded = np.pad(x, (half, half), mode="reflect")
    frames = _frames(padded, fft_size, hop, 0, n)
    if remove_dc:
        frames = frames - frames.mean(axis=1, keepdims=True)
    window = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(fft_size) / fft_size)
    mag = np.abs(np.fft.rfft(frames * window, axis=1)).T
    return FeatureSequence(mag, hop / sig.sample_rate, sig.sample_rate, "stft")


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, fft_size: int = FFT_SIZE, n_mels: int = N_MELS) -> np.ndarray:
    """Triangular HTK-mel filters from 0 Hz to Nyquist, shape ``(n_mels, fft_size/2 + 1)``."""
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_mels + 2))
    freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rise = (freqs[None, :] - lo) / (mid - lo)
    fall = (hi - freqs[None, :]) / (hi - mid)
    return np.maximum(0.0, np.minimum(rise, fall))


def cepstrum_from_mel_energies(energies: np.ndarray, order: int = MCEP_ORDER) -> np.ndarray:
    """Log (floored) then orthonormal DCT-II along the band axis; keeps ``order + 1`` rows."""
    if order + 1 > energies.shape[0]:
        raise DimensionMismatchError(f"order {order} needs at least {order + 1} mel bands, got {energies.shape[0]}")
    logmel = np.log(np.maximum(energies, LOG_FLOOR))
    return dct(logmel, type=2, norm="ortho", axis=0)[: order + 1]


def mcep(spec: FeatureSequence, order: int = MCEP_ORDER, sample_rate: Optional[int] = None,
         n_mels: int = N_MELS, drop_c0: bool = False) -> FeatureSequence:
    """Mel-cepstrum of a magnitude STFT: 40 mel band energies, log, DCT.

    Returns ``order + 1`` rows (``order`` with ``drop_c0``).
    """
    sr = sample_rate or spec.sample_rate
    if not sr:
        raise ValueError("mcep needs a sample rate (spectrum carries none)")
    fft_size = 2 * (spec.d - 1)
    fb = mel_filterbank(sr, fft_size, n_mels)
    if fb.shape[1] != spec.d:
        raise DimensionMismatchError(f"filterbank expects {fb.shape[1]} bins, spectrum has {spec.d}")
    c = cepstrum_from_mel_energies(fb @ (spec.data ** 2), order)
    if drop_c0:
        c = c[1:]
    return FeatureSequence(c, spec.hop_seconds, sr, "mcep")


# -- F0 ----------------------------------------------------------------------

def _yin_cmnd(x: np.ndarray, sr: int, hop: int, n: int, w: int, tau_max: int):
    seg = w + tau_max
    start = w // 2
    padded = np.pad(x, (seg, seg))
    frames = _frames(padded, seg, hop, seg - start, n)

    nfft = 1 << int(np.ceil(np.log2(seg + w)))
    head = np.zeros_like(frames)
    head[:, :w] = frames[:, :w]
    r = np.fft.irfft(np.conj(np.fft.rfft(head, nfft)) * np.fft.rfft(frames, nfft), nfft)[:, : tau_max + 1]
    sq = np.concatenate([np.zeros((n, 1)), np.cumsum(frames ** 2, axis=1)], axis=1)
    taus = np.arange(tau_max + 1)
    e0 = sq[:, w][:, None]
    et = sq[:, taus + w] - sq[:, taus]
    diff = np.maximum(e0 + et - 2.0 * r, 0.0)

    cum = np.cumsum(diff[:, 1:], axis=1)
    cmnd = np.ones_like(diff)
    with np.errstate(divide="ignore", invalid="ignore"):
        cmnd[:, 1:] = np.where(cum > 0, diff[:, 1:] * taus[1:] / cum, 1.0)
    rms = np.sqrt(e0[:, 0] / w)
    return cmnd, diff, rms


def f0_contour(sig: AudioSignal, hop_seconds: float = HOP_SECONDS, fmin: float = 60.0,
               fmax: float = 800.0, threshold: float = YIN_THRESHOLD) -> PitchContour:
    """YIN F0 track with one value per ``hop`` (same frame grid as :func:`stft_mag`)."""
    sr = sig.sample_rate
    tau_max = int(np.floor(sr / fmin))
    tau_min = max(2, int(np.ceil(sr / fmax)))
    w = tau_max
    if len(sig) < w + tau_max:
        raise SignalTooShortError(f"signal has {len(sig)} samples; YIN needs at least {w + tau_max} (2/fmin s)")
    hop = hop_samples(hop_seconds, sr)
    n = n_frames(len(sig), hop)
    cmnd, diff, rms = _yin_cmnd(sig.samples, sr, hop, n, w, tau_max)

    f0 = np.zeros(n)
    below = cmnd[:, tau_min:tau_max] < threshold
    has = below.any(axis=1) & (rms > SILENCE_RMS)
    first = np.argmax(below, axis=1) + tau_min
    for t in np.nonzero(has)[0]:
        c = cmnd[t]
        tau = first[t]
        while tau + 1 < tau_max and c[tau + 1] < c[tau]:
            tau += 1
        # refine on the raw difference function, which is less biased than the normalized one
        a, b_, g = diff[t, tau - 1], diff[t, tau], diff[t, tau + 1]
        denom = a - 2 * b_ + g
        shift = 0.5 * (a - g) / denom if denom > 0 else 0.0
        f0[t] = sr / (tau + float(np.clip(shift, -0.5, 0.5)))
    f0[(f0 < fmin * 0.95) | (f0 > fmax * 1.05)] = 0.0
    return PitchContour(f0, hop / sr)


# -- dimensionality reduction and normalization ------------------------------

@dataclass(frozen=True, eq=False)
class PCAModel:
    components: np.ndarray   # (k, d)
    mean: np.ndarray         # (d,)
    explained_variance: np.ndarray
    explained_variance_ratio: np.ndarray

    def transform(self, data: np.ndarray) -> np.ndarray:
        return self.components @ (data - self.mean[:, None])

    def inverse_transform(self, z: np.ndarray) -> np.ndarray:
        return self.components.T @ z + self.mean[:, None]


def fit_pca(data: np.ndarray, k: int) -> PCAModel:
    """PCA on the columns of ``data`` (``d x N``); component signs make the first entry positive."""
    data = np.asarray(data, dtype=np.float64)
    d = data.shape[0]
    if k < 1 or k > d:
        raise ValueError(f"PCA dimension k={k} must satisfy 1 <= k <= d={d}")
    mean = data.mean(axis=1)
    u, s, _ = np.linalg.svd(data - mean[:, None], full_matrices=False)
    comps = u[:, :k].T.copy()
    for c in range(k):
        nz = np.nonzero(np.abs(comps[c]) > 1e-12)[0]
        if nz.size and comps[c, nz[0]] < 0:
            comps[c] *= -1
    var = s ** 2 / data.shape[1]
    total = var.sum()
    ratio = var[:k] / total if total > 0 else np.zeros(k)
    return PCAModel(comps, mean, var[:k], ratio)


def pca_reduce(x: FeatureSequence, y: FeatureSequence, k: int = 25) -> Tuple[FeatureSequence, FeatureSequence]:
    """Project both sequences onto the top-``k`` components of their pooled frames."""
    if x.d != y.d:
        raise DimensionMismatchError(f"PCA inputs differ in dimension: {x.d} vs {y.d}")
    model = fit_pca(np.hstack([x.data, y.data]), k)
    return x.with_data(model.transform(x.data)), y.with_data(model.transform(y.data))


def znorm(seq: FeatureSequence) -> FeatureSequence:
    """Per-dimension zero mean, unit variance (constant rows are only centred)."""
    mu = seq.data.mean(axis=1, keepdims=True)
    sd = seq.data.std(axis=1, keepdims=True)
    sd[sd < 1e-12] = 1.0
    return seq.with_data((seq.data - mu) / sd)


def extract_features(sig: AudioSignal, feature: str = "mcep", order: int = MCEP_ORDER,
                     fft_size: int = FFT_SIZE, hop_seconds: float = HOP_SECONDS,
                     drop_c0: bool = False, label: str = "") -> FeatureSequence:
    """``"mcep"`` (order+1 rows) or ``"stft"`` (fft_size/2+1 rows) features for alignment."""
    spec = stft_mag(sig, fft_size, hop_seconds)
    if feature == "stft":
        out = spec
    elif feature == "mcep":
        out = mcep(spec, order, sig.sample_rate, drop_c0=drop_c0)
    else:
        raise ValueError(f"unknown feature kind {feature!r} (expected 'mcep' or 'stft')")
    return out.with_data(out.data, label=label or out.label)
