"""Synthetic alignment benchmark with exact ground-truth warping paths.

A song is a list of notes (random walk on a major scale) turned into
continuous control curves ``f0(t)`` and ``amp(t)``, then rendered by additive
synthesis through a fixed three-formant envelope. Distorted targets are
re-rendered from the same curves evaluated at warped time, so the warp
``tau`` (source seconds -> target seconds) is known exactly.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from .core import InvalidPathError, WarpingPath, check_path, connect_anchors
from .ctw import CtwConfig, ctw_align
from .dtw import dtw_align
from .features import DEFAULT_SR, AudioSignal, PitchContour, extract_features, f0_contour, znorm

logger = logging.getLogger(__name__)

LINEAR_RATES = (0.8, 0.9, 1.0, 1.1, 1.2)
SHIFTS = (-2, -1, 0, 1, 2)
N_CHUNKS = 5
METHODS = ("dtw", "ctw_uniform", "ctw_dtw")
TASKS = ("mono_to_mono", "mono_to_poly")

N_HARMONICS = 20
VIBRATO_HZ = 5.5
VIBRATO_SEMITONES = 0.30
PORTAMENTO_S = 0.060
ATTACK_S = 0.030
RELEASE_S = 0.050
MIDI_LO, MIDI_HI = 55, 76
MAJOR_STEPS = (0, 2, 4, 5, 7, 9, 11)
# (centre Hz, bandwidth Hz, gain) of the fixed vowel envelope
FORMANTS = ((700.0, 130.0, 1.0), (1220.0, 90.0, 0.5), (2600.0, 160.0, 0.25))
OUTPUT_GAIN = 0.4
PAD_DB = -10.0
NOISE_DB = -26.0


# -- song controls -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SongControls:
    """Note list plus the analytic control curves derived from it.

    ``legato[k]`` is true when note ``k`` starts exactly where note ``k-1``
    ends; such notes glide in pitch and level over the portamento time.
    """

    onsets: np.ndarray
    durations: np.ndarray
    midi: np.ndarray
    levels: np.ndarray
    legato: np.ndarray
    tonic: int
    duration_s: float
    sample_rate: int = DEFAULT_SR

    @property
    def offsets(self) -> np.ndarray:
        return self.onsets + self.durations

    def _note_index(self, t: np.ndarray) -> np.ndarray:
        k = np.searchsorted(self.onsets, t, side="right") - 1
        inside = (k >= 0) & (t < self.offsets[np.clip(k, 0, None)])
        return np.where(inside, k, -1)

    def midi_at(self, t) -> np.ndarray:
        """Continuous pitch in MIDI units (NaN outside notes), vibrato included."""
        t = np.asarray(t, dtype=np.float64)
        k = self._note_index(t)
        on = k >= 0
        kk = np.clip(k, 0, None)
        pitch = self.midi[kk].astype(np.float64)
        prev = self.midi[np.clip(kk - 1, 0, None)]
        since = t - self.onsets[kk]
        glide = on & self.legato[kk] & (since < PORTAMENTO_S)
        frac = np.clip(since / PORTAMENTO_S, 0.0, 1.0)
        pitch = np.where(glide, prev + (pitch - prev) * frac, pitch)
        pitch = pitch + VIBRATO_SEMITONES * np.sin(2 * np.pi * VIBRATO_HZ * t)
        return np.where(on, pitch, np.nan)

    def f0_at(self, t) -> np.ndarray:
        m = self.midi_at(t)
        return np.where(np.isnan(m), 0.0, 440.0 * 2.0 ** ((np.nan_to_num(m) - 69.0) / 12.0))

    def amp_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        k = self._note_index(t)
        on = k >= 0
        kk = np.clip(k, 0, None)
        since = t - self.onsets[kk]
        until = self.offsets[kk] - t
        nxt = np.clip(kk + 1, None, len(self.onsets) - 1)
        tied_out = (kk + 1 < len(self.onsets)) & self.legato[nxt]
        level = self.levels[kk]
        prev_level = self.levels[np.clip(kk - 1, 0, None)]
        glide = self.legato[kk] & (since < PORTAMENTO_S)
        level = np.where(glide, prev_level + (level - prev_level) * np.clip(since / PORTAMENTO_S, 0, 1), level)
        att = np.where(self.legato[kk], 1.0, np.clip(since / ATTACK_S, 0.0, 1.0))
        rel = np.where(tied_out, 1.0, np.clip(until / RELEASE_S, 0.0, 1.0))
        return np.where(on, level * att * rel, 0.0)

    def held_note_at(self, t) -> np.ndarray:
        """Index of the latest note started by ``t``, held through rests (-1 before the first note)."""
        return np.searchsorted(self.onsets, np.asarray(t, dtype=np.float64), side="right") - 1


def _scale_notes(tonic: int) -> np.ndarray:
    return np.array([m for m in range(MIDI_LO, MIDI_HI + 1) if (m - tonic) % 12 in MAJOR_STEPS])


def song_controls(seed: int, duration_s: float = 30.0, sample_rate: int = DEFAULT_SR) -> SongControls:
    """Random note sequence: 0.3-1.0 s notes, MIDI 55-76, rests filling about 10% of the time."""
    if duration_s < 2.0:
        raise ValueError(f"song duration must be >= 2 s, got {duration_s}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5046]))
    tonic = int(rng.integers(0, 12))
    scale = _scale_notes(tonic)
    pos = int(rng.integers(len(scale) // 4, 3 * len(scale) // 4))
    onsets, durs, midi, levels, legato = [], [], [], [], []
    t = float(rng.uniform(0.1, 0.3))
    tied = False
    while t < duration_s - 0.2:
        dur = float(min(rng.uniform(0.3, 1.0), duration_s - t))
        onsets.append(t)
        durs.append(dur)
        midi.append(int(scale[pos]))
        levels.append(float(rng.uniform(0.5, 1.0)))
        legato.append(tied)
        t += dur
        tied = True
        if rng.random() < 0.2:
            t += float(rng.uniform(0.25, 0.47))
            tied = False
        step = int(rng.choice([-2, -1, 0, 1, 2], p=[0.15, 0.3, 0.1, 0.3, 0.15]))
        pos = pos + step
        if pos < 0 or pos >= len(scale):
            pos = int(np.clip(pos - 2 * step, 0, len(scale) - 1))
    return SongControls(np.array(onsets), np.array(durs), np.array(midi), np.array(levels),
                        np.array(legato, dtype=bool), tonic, float(duration_s), sample_rate)


def formant_gain(freq: np.ndarray) -> np.ndarray:
    g = np.full_like(freq, 0.15)
    for centre, bw, gain in FORMANTS:
        g = g + gain / (1.0 + ((freq - centre) / (0.5 * bw)) ** 2)
    return g


def render_voice(controls: SongControls, control_time: np.ndarray, shift_semitones: float = 0.0) -> np.ndarray:
    """Additive synthesis of the vocal line at the given control times (one per output sample)."""
    sr = controls.sample_rate
    f0 = controls.f0_at(control_time) * 2.0 ** (shift_semitones / 12.0)
    amp = controls.amp_at(control_time)
    phase = 2 * np.pi * np.cumsum(f0) / sr
    out = np.zeros_like(phase)
    nyq = 0.5 * sr
    for h in range(1, N_HARMONICS + 1):
        fh = h * f0
        g = formant_gain(fh) / h * np.clip((nyq - fh) / 200.0, 0.0, 1.0)
        out += g * np.sin(h * phase)
    return OUTPUT_GAIN * amp * out


def synth_song(seed: int, duration_s: float = 30.0, sample_rate: int = DEFAULT_SR):
    """Deterministic synthetic singing; returns ``(AudioSignal, SongControls)``."""
    controls = song_controls(seed, duration_s, sample_rate)
    t = np.arange(int(round(duration_s * sample_rate))) / sample_rate
    return AudioSignal(render_voice(controls, t), sample_rate), controls


# -- distortion --------------------------------------------------------------

@dataclass(frozen=True)
class DistortionSpec:
    """A uniform rate ``stretch`` or five per-chunk rates, a semitone shift and a task."""

    stretch: Union[float, Tuple[float, ...]] = 1.0
    shift_semitones: int = 0
    task: str = "mono_to_mono"
    seed: int = 0

    def __post_init__(self):
        rates = self.rates
        if isinstance(self.stretch, (tuple, list)):
            object.__setattr__(self, "stretch", tuple(float(r) for r in self.stretch))
            if len(self.stretch) != N_CHUNKS:
                raise ValueError(f"nonlinear stretch needs exactly {N_CHUNKS} chunk rates, got {len(self.stretch)}")
        if any(not 0.5 <= r <= 2.0 for r in rates):
            raise ValueError(f"stretch rates must lie in [0.5, 2.0], got {rates}")
        if int(self.shift_semitones) != self.shift_semitones or not -12 <= self.shift_semitones <= 12:
            raise ValueError(f"shift must be an integer in [-12, 12], got {self.shift_semitones}")
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")

    @property
    def nonlinear(self) -> bool:
        return isinstance(self.stretch, tuple)

    @property
    def rates(self) -> Tuple[float, ...]:
        return tuple(self.stretch) if isinstance(self.stretch, (tuple, list)) else (float(self.stretch),)


@dataclass(frozen=True, eq=False)
class WarpMap:
    """Piecewise-linear source-to-target time map; chunk ``k`` has slope ``1/rates[k]``."""

    source_knots: np.ndarray
    target_knots: np.ndarray

    @classmethod
    def from_rates(cls, source_duration: float, rates: Sequence[float]) -> "WarpMap":
        k = len(rates)
        src = np.linspace(0.0, source_duration, k + 1)
        tgt = np.concatenate([[0.0], np.cumsum(np.diff(src) / np.asarray(rates, dtype=np.float64))])
        return cls(src, tgt)

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.source_knots, self.target_knots))

    @property
    def target_duration(self) -> float:
        return float(self.target_knots[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        return t.copy() if self.is_identity else np.interp(t, self.source_knots, self.target_knots)

    def inverse(self, u):
        u = np.asarray(u, dtype=np.float64)
        return u.copy() if self.is_identity else np.interp(u, self.target_knots, self.source_knots)


def pink_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.arange(spec.shape[0], dtype=np.float64)
    f[0] = 1.0
    x = np.fft.irfft(spec / np.sqrt(f), n)
    return x / (np.sqrt(np.mean(x ** 2)) + 1e-300)


def render_pad(controls: SongControls, control_time: np.ndarray, shift_semitones: float = 0.0) -> np.ndarray:
    """Root-position diatonic triad on each melody note, an octave down, held until the next note."""
    sr = controls.sample_rate
    k = controls.held_note_at(control_time)
    sounding = k >= 0
    kk = np.clip(k, 0, None)
    scale = _scale_notes(controls.tonic)
    # extend the scale an octave down so the triad can sit below the melody
    full = np.concatenate([scale - 12, scale])
    root = np.searchsorted(full, controls.midi[kk]) - len(scale)
    out = np.zeros(control_time.shape[0])
    env = np.clip((control_time - controls.onsets[kk]) / 0.05, 0.0, 1.0) * sounding
    for step in (0, 2, 4):
        pos = np.clip(root + step, 0, len(full) - 1)
        freq = 440.0 * 2.0 ** ((full[pos] - 69.0 + shift_semitones) / 12.0)
        phase = 2 * np.pi * np.cumsum(freq) / sr
        for h, g in ((1, 1.0), (2, 0.4), (3, 0.2)):
            out += g * np.sin(h * phase)
    return out * env


def distort(controls: SongControls, spec: DistortionSpec):
    """Re-render the song under ``spec``; returns ``(target AudioSignal, WarpMap)``.

    The target plays the source curves at ``tau^-1(t)`` with F0 scaled by
    ``2^(s/12)``. For ``mono_to_poly`` a triad pad (-10 dB) and pink noise
    (-26 dB), both relative to the vocal RMS, are mixed into the target.
    """
    sr = controls.sample_rate
    tau = WarpMap.from_rates(controls.duration_s, spec.rates)
    n_out = int(round(tau.target_duration * sr))
    u = np.arange(n_out) / sr
    tc = tau.inverse(u)
    y = render_voice(controls, tc, spec.shift_semitones)
    if spec.task == "mono_to_poly":
        rng = np.random.default_rng(np.random.SeedSequence([int(spec.seed), 0x504F4C59]))
        vocal_rms = np.sqrt(np.mean(y ** 2))
        pad = render_pad(controls, tc, spec.shift_semitones)
        pad *= vocal_rms * 10 ** (PAD_DB / 20) / (np.sqrt(np.mean(pad ** 2)) + 1e-300)
        y = y + pad + vocal_rms * 10 ** (NOISE_DB / 20) * pink_noise(n_out, rng)
    return AudioSignal(y, sr), tau


# -- ground truth and scoring ------------------------------------------------

def gt_path_from_warp(tau, n_x: int, n_y: int, hop_seconds: float) -> WarpingPath:
    """Rasterize ``j = tau(i*hop)/hop`` into a valid path from (0,0) to (n_x-1, n_y-1)."""
    i = np.arange(n_x)
    u = np.asarray(tau(i * hop_seconds), dtype=np.float64)
    if np.any(np.diff(u) < 0):
        raise InvalidPathError("warp function is not monotone increasing")
    j = np.clip(np.floor(u / hop_seconds + 0.5).astype(np.int64), 0, n_y - 1)
    j[0] = 0
    j[-1] = n_y - 1
    j = np.maximum.accumulate(j)
    path = connect_anchors(i, j)
    check_path(path, n_x, n_y)
    return path


def alignment_error(est: WarpingPath, gt: WarpingPath) -> float:
    """Symmetric mean point-to-path distance between two paths, in frames."""
    if est.m == 0 or gt.m == 0:
        raise InvalidPathError("cannot score an empty path")
    if tuple(est.pairs[-1]) != tuple(gt.pairs[-1]):
        raise InvalidPathError(f"paths cover different grids: ends {tuple(est.pairs[-1])} vs {tuple(gt.pairs[-1])}")
    a = est.pairs.astype(np.float64)
    b = gt.pairs.astype(np.float64)
    d_ab, _ = cKDTree(b).query(a)
    d_ba, _ = cKDTree(a).query(b)
    return float((d_ab.sum() + d_ba.sum()) / (len(a) + len(b)))


# -- cases and experiments ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class BenchmarkCase:
    source_features: object
    target_features: object
    gt_path: WarpingPath
    spec: DistortionSpec
    source_f0: Optional[PitchContour] = None
    target_f0: Optional[PitchContour] = None


def _features(sig: AudioSignal, use_znorm: bool, label: str):
    feat = extract_features(sig, "mcep", label=label)
    return znorm(feat) if use_znorm else feat


def make_case(song_seed: int, spec: DistortionSpec, duration_s: float = 30.0,
              with_f0: bool = True, use_znorm: bool = True) -> BenchmarkCase:
    src_sig, controls = synth_song(song_seed, duration_s)
    tgt_sig, tau = distort(controls, spec)
    x = _features(src_sig, use_znorm, "source")
    y = _features(tgt_sig, use_znorm, "target")
    gt = gt_path_from_warp(tau, x.n, y.n, x.hop_seconds)
    f0s = f0_contour(src_sig) if with_f0 else None
    f0t = f0_contour(tgt_sig) if with_f0 else None
    return BenchmarkCase(x, y, gt, spec, f0s, f0t)


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "linear"
    tasks: Tuple[str, ...] = TASKS
    methods: Tuple[str, ...] = METHODS
    rates: Tuple[float, ...] = LINEAR_RATES
    shifts: Tuple[int, ...] = SHIFTS
    n_songs: int = 30
    seed: int = 0
    duration_s: float = 30.0
    use_znorm: bool = True
    ctw_b: Optional[int] = None
    ctw_lam: Optional[float] = None
    ctw_max_iter: int = 30
    ctw_tol: float = 1e-4

    def __post_init__(self):
        if self.scenario not in ("linear", "nonlinear"):
            raise ValueError(f"scenario must be 'linear' or 'nonlinear', got {self.scenario!r}")
        for t in self.tasks:
            if t not in TASKS:
                raise ValueError(f"unknown task {t!r}")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        if self.n_songs < 1:
            raise ValueError("n_songs must be >= 1")
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        object.__setattr__(self, "shifts", tuple(int(s) for s in self.shifts))

    def song_seed(self, k: int) -> int:
        return int(np.random.SeedSequence([self.seed, k]).generate_state(1)[0])

    def chunk_rates(self, k: int) -> Tuple[float, ...]:
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, k, 0x524154]))
        return tuple(float(r) for r in np.round(rng.uniform(0.8, 1.2, N_CHUNKS), 6))

    def ctw_config(self, init: str) -> CtwConfig:
        return CtwConfig(init=init, b=self.ctw_b, lam=self.ctw_lam, max_iter=self.ctw_max_iter, tol=self.ctw_tol)


def _align_all(x, y, methods, cfg: ExperimentConfig) -> dict:
    out = {}
    dtw_path = None
    if "dtw" in methods or "ctw_dtw" in methods:
        dtw_path = dtw_align(x, y).path
        out["dtw"] = dtw_path
    if "ctw_uniform" in methods:
        out["ctw_uniform"] = ctw_align(x, y, cfg.ctw_config("uniform")).path
    if "ctw_dtw" in methods:
        out["ctw_dtw"] = ctw_align(x, y, cfg.ctw_config("dtw"), init_path=dtw_path).path
    return out


def _run_song(args):
    """All grid cells for one song; returns ``[(cell_key, method, e or None, error_msg)]``."""
    cfg, k = args
    seed = cfg.song_seed(k)
    rows = []
    src_sig, controls = synth_song(seed, cfg.duration_s)
    x = _features(src_sig, cfg.use_znorm, "source")
    stretches = [cfg.chunk_rates(k)] if cfg.scenario == "nonlinear" else list(cfg.rates)
    for stretch in stretches:
        for s in cfg.shifts:
            for task in cfg.tasks:
                key = (task, stretch if cfg.scenario == "linear" else None, s)
                try:
                    spec = DistortionSpec(stretch, s, task, seed)
                    tgt_sig, tau = distort(controls, spec)
                    y = _features(tgt_sig, cfg.use_znorm, "target")
                    gt = gt_path_from_warp(tau, x.n, y.n, x.hop_seconds)
                    paths = _align_all(x, y, cfg.methods, cfg)
                    for m in cfg.methods:
                        rows.append((key, m, alignment_error(paths[m], gt), None))
                except Exception as exc:  # a failed case marks its cell, the grid continues
                    logger.warning("song %d cell %s failed: %s", k, key, exc)
                    for m in cfg.methods:
                        rows.append((key, m, None, f"{type(exc).__name__}: {exc}"))
    return k, seed, rows


@dataclass
class CellResult:
    method: str
    task: str
    scenario: str
    s: int
    n_songs: int
    median_e: Optional[float]
    iqr_e: Optional[float]
    seeds: list
    r: Optional[float] = None
    rates: Optional[list] = None
    errors: list = field(default_factory=list)
    failed: int = 0
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.r is None:
            d.pop("r")
        if self.rates is None:
            d.pop("rates")
        return d


def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None) -> list:
    """Median and IQR of the error measure per (method, task, stretch, shift) cell."""
    workers = workers or os.cpu_count() or 1
    jobs = [(cfg, k) for k in range(cfg.n_songs)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            songs = list(pool.map(_run_song, jobs))
    else:
        songs = [_run_song(j) for j in jobs]
    songs.sort(key=lambda t: t[0])

    cells: dict = {}
    for k, seed, rows in songs:
        for key, method, e, err in rows:
            c = cells.setdefault((key, method), {"e": [], "seeds": [], "fail": [], "rates": []})
            c["seeds"].append(seed)
            if cfg.scenario == "nonlinear":
                c["rates"].append(list(cfg.chunk_rates(k)))
            if e is None:
                c["fail"].append({"song": k, "error": err})
            else:
                c["e"].append(e)

    results = []
    for (key, method), c in sorted(cells.items(), key=lambda kv: _cell_order(kv[0], cfg)):
        task, r, s = key
        e = np.array(c["e"])
        med = float(np.median(e)) if e.size else None
        iqr = float(np.subtract(*np.percentile(e, [75, 25]))) if e.size else None
        results.append(CellResult(method=method, task=task, scenario=cfg.scenario, s=s,
                                  n_songs=cfg.n_songs, median_e=med, iqr_e=iqr, seeds=c["seeds"],
                                  r=r, rates=c["rates"] if cfg.scenario == "nonlinear" else None,
                                  errors=[float(v) for v in e], failed=len(c["fail"]),
                                  failures=c["fail"]))
    return results


def _cell_order(k, cfg):
    (task, r, s), method = k
    return (cfg.tasks.index(task), cfg.methods.index(method), -1 if r is None else r, s)


def results_to_plot_rows(results: Sequence[CellResult]) -> list:
    """One ``(scenario, task, method, r, s, median_e)`` row per cell for external plotting."""
    return [(c.scenario, c.task, c.method, "" if c.r is None else c.r, c.s,
             "" if c.median_e is None else c.median_e) for c in results]


__all__ = ["SongControls", "song_controls", "synth_song", "render_voice", "DistortionSpec", "WarpMap",
           "distort", "gt_path_from_warp", "alignment_error", "BenchmarkCase", "make_case",
           "ExperimentConfig", "CellResult", "run_experiment", "results_to_plot_rows",
           "LINEAR_RATES", "SHIFTS", "METHODS", "TASKS"]
