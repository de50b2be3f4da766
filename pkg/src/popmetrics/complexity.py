"""Structural-change complexity features.

A song is summarized by 20 numbers: the mean Jensen-Shannon divergence between
adjacent aggregation windows of its chroma, rhythm, and timbre component
sequences at six dyadic window scales each (1 s to 32 s), plus the mean and
standard deviation of short-time loudness (arousal).

Component conventions (the upstream feature designs are deliberately simple,
deterministic stand-ins; see README):

* chroma: per 0.25 s segment, spectral magnitude mapped to the nearest of the
  12 equal-tempered pitch classes (A4 = 440 Hz) over 55-4186 Hz, normalized to
  a probability distribution. Silent segments fall back to uniform.
* rhythm: per 2.97 s segment (hop 1 s), the segment is cut into 256 raw
  512-sample frames; per frame 12 mel band energies; per band, the magnitude
  DFT of the 256-point energy trajectory keeps the first 30 modulation bins
  above DC (up to ~10 Hz), giving a 12x30 fluctuation pattern flattened to a
  360-dim vector. Frames are not tapered so a steady signal has an exactly
  constant trajectory and zero fluctuation.
* timbre: the same raw frames; each yields a 36-band MFCC (all 36
  coefficients) and the 256 frames of a segment are averaged. Rhythm and
  timbre therefore share one spectral pass over the clip.

Frame spectra are computed in float32: the features are coarse statistics and
extraction is the pipeline's hot path.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from scipy.fft import dct

from .dsp import (
    CANONICAL_RATE,
    LOG_ENERGY_FLOOR,
    AudioClip,
    frame_starts,
    mel_filterbank,
    resample_to,
)

PITCH_CLASSES = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"]

CHROMA_SEGMENT_SECONDS = 0.25
CHROMA_FMIN = 55.0     # A1
CHROMA_FMAX = 4186.0   # C8

FRAME_LEN = 512
FRAMES_PER_SEGMENT = 256
SEGMENT_LEN = FRAMES_PER_SEGMENT * FRAME_LEN  # 131072 samples at 44.1 kHz
SEGMENT_HOP_SECONDS = 1.0
RHYTHM_MEL_BANDS = 12
RHYTHM_MOD_BINS = 30
TIMBRE_MEL_BANDS = 36
AROUSAL_WINDOW_SECONDS = 2.97

DEFAULT_J_VALUES = {
    "chroma": tuple(range(3, 9)),
    "rhythm": tuple(range(1, 7)),
    "timbre": tuple(range(1, 7)),
}

COMPLEXITY_FEATURE_NAMES = (
    [f"ChromaSC{i}" for i in range(1, 7)]
    + [f"RhythmSC{i}" for i in range(1, 7)]
    + [f"TimbreSC{i}" for i in range(1, 7)]
    + ["ArousalMean", "ArousalStd"]
)


@dataclass
class ComponentSequence:
    """Time series of per-segment component vectors feeding structural change."""

    kind: str  # chroma | rhythm | timbre
    segment_seconds: float
    vectors: np.ndarray  # (n_segments, dim)

    def __post_init__(self):
        if self.kind not in DEFAULT_J_VALUES:
            raise ValueError(f"unknown component kind {self.kind!r}")
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise ValueError("vectors must be a 2-D (segments x dim) array")
        if self.kind == "chroma":
            if np.any(self.vectors < 0):
                raise ValueError("chroma vectors must be non-negative")
            sums = self.vectors.sum(axis=1)
            if np.any(np.abs(sums - 1.0) > 1e-9):
                raise ValueError("chroma vectors must each sum to 1")

    def __len__(self) -> int:
        return self.vectors.shape[0]


@dataclass
class ComplexityFeatureVector:
    """The 20 complexity features in fixed order (COMPLEXITY_FEATURE_NAMES)."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(COMPLEXITY_FEATURE_NAMES),):
            raise ValueError(f"expected {len(COMPLEXITY_FEATURE_NAMES)} features")

    def as_dict(self) -> dict[str, float]:
        return {name: float(v) for name, v in zip(COMPLEXITY_FEATURE_NAMES, self.values)}

    def __getitem__(self, name: str) -> float:
        return float(self.values[COMPLEXITY_FEATURE_NAMES.index(name)])


def _kl_base2_rows(a: np.ndarray, m: np.ndarray) -> np.ndarray:
    # 0 * log(0/x) == 0; wherever a > 0, m >= a/2 > 0, so the ratio is safe
    ratio = np.where(a > 0, a / np.where(m > 0, m, 1.0), 1.0)
    return np.sum(a * np.log2(ratio), axis=-1)


def jsd_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise Jensen-Shannon divergence (base 2) of two (n, d) arrays."""
    m = 0.5 * (p + q)
    return 0.5 * _kl_base2_rows(p, m) + 0.5 * _kl_base2_rows(q, m)


def jsd(p, q) -> float:
    """Jensen-Shannon divergence between two probability distributions.

    Base-2 logarithms, so the result lies in [0, 1]; 1 is reached exactly for
    disjoint supports. Inputs must be equal-length, non-negative, and each sum
    to 1 (within 1e-9).
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError(f"distributions must be equal-length 1-D, got {p.shape} and {q.shape}")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("distributions must be non-negative")
    value = float(jsd_rows(p[None, :], q[None, :])[0])
    return min(max(value, 0.0), 1.0)


def rows_to_distributions(rows: np.ndarray) -> np.ndarray:
    """Normalize each row to a probability distribution.

    Rows containing negative entries (timbre window sums) are first shifted by
    their own minimum plus a tiny epsilon; all-zero rows become uniform.
    """
    rows = np.array(rows, dtype=np.float64, copy=True)
    mins = rows.min(axis=-1, keepdims=True)
    rows = np.where(mins < 0, rows - mins + 1e-9, rows)
    sums = rows.sum(axis=-1, keepdims=True)
    d = rows.shape[-1]
    safe = np.where(sums > 0, sums, 1.0)
    out = rows / safe
    out = np.where(sums > 0, out, np.full(d, 1.0 / d))
    return out


@lru_cache(maxsize=8)
def _chroma_aggregation(n_bins: int, sample_rate: int, segment_len: int) -> tuple:
    """(selected bin indices, 12 x n_selected pitch-class indicator matrix)."""
    freqs = np.arange(n_bins) * sample_rate / segment_len
    sel = np.where((freqs >= CHROMA_FMIN) & (freqs <= CHROMA_FMAX))[0]
    semitones = np.round(12.0 * np.log2(freqs[sel] / 440.0)).astype(np.int64)
    classes = (semitones + 9) % 12  # A4 maps to pitch class A, index 9
    indicator = np.zeros((12, sel.size), dtype=np.float32)
    indicator[classes, np.arange(sel.size)] = 1.0
    return sel, indicator


def chroma_sequence(clip: AudioClip) -> ComponentSequence:
    """Pitch-class distributions over non-overlapping 0.25 s segments."""
    clip = resample_to(clip, CANONICAL_RATE)
    seg_len = int(round(CHROMA_SEGMENT_SECONDS * CANONICAL_RATE))
    if clip.samples.size < seg_len:
        raise ValueError(
            f"clip too short for chroma: need >= {CHROMA_SEGMENT_SECONDS} s"
        )
    n_seg = clip.samples.size // seg_len
    segments = clip.samples[: n_seg * seg_len].astype(np.float32).reshape(n_seg, seg_len)
    mags = np.abs(np.fft.rfft(segments, axis=-1))
    sel, indicator = _chroma_aggregation(mags.shape[1], CANONICAL_RATE, seg_len)
    class_energy = (mags[:, sel] @ indicator.T).astype(np.float64)
    return ComponentSequence(
        kind="chroma",
        segment_seconds=CHROMA_SEGMENT_SECONDS,
        vectors=rows_to_distributions(class_energy),
    )


def _long_segment_starts(clip: AudioClip) -> np.ndarray:
    if clip.samples.size < SEGMENT_LEN:
        raise ValueError(
            f"clip too short: need >= {SEGMENT_LEN / CANONICAL_RATE:.3f} s"
        )
    hop = int(round(SEGMENT_HOP_SECONDS * CANONICAL_RATE))
    return frame_starts(clip.samples.size, SEGMENT_LEN, hop)


def _long_component_vectors(clip: AudioClip, want_rhythm: bool, want_timbre: bool):
    """One spectral pass over the 2.97 s segments shared by rhythm and timbre.

    Per segment, the 256 raw frames' magnitude spectra are computed once and
    reduced to whichever component vectors are requested.
    """
    clip = resample_to(clip, CANONICAL_RATE)
    starts = _long_segment_starts(clip)
    samples = clip.samples.astype(np.float32)

    n_bins = FRAME_LEN // 2 + 1
    w_rhythm = mel_filterbank(n_bins, CANONICAL_RATE, RHYTHM_MEL_BANDS).astype(np.float32).T
    w_timbre = mel_filterbank(n_bins, CANONICAL_RATE, TIMBRE_MEL_BANDS).astype(np.float32).T

    rhythm_rows = [] if want_rhythm else None
    timbre_rows = [] if want_timbre else None
    for s in starts:
        frames = samples[s : s + SEGMENT_LEN].reshape(FRAMES_PER_SEGMENT, FRAME_LEN)
        mags = np.abs(np.fft.rfft(frames, axis=-1))
        if want_rhythm:
            traj = mags @ w_rhythm  # (frames, 12) band energy trajectories
            mod = np.abs(np.fft.rfft(traj, axis=0))[1 : RHYTHM_MOD_BINS + 1]
            rhythm_rows.append(mod.T.ravel().astype(np.float64))
        if want_timbre:
            energies = mags @ w_timbre
            coeffs = dct(np.log(energies + LOG_ENERGY_FLOOR), type=2, axis=-1)
            timbre_rows.append(coeffs.mean(axis=0, dtype=np.float64))
    return rhythm_rows, timbre_rows


def rhythm_sequence(clip: AudioClip) -> ComponentSequence:
    """Fluctuation patterns: per-band modulation magnitudes per 2.97 s segment."""
    rows, _ = _long_component_vectors(clip, want_rhythm=True, want_timbre=False)
    return ComponentSequence(
        kind="rhythm", segment_seconds=SEGMENT_HOP_SECONDS, vectors=np.array(rows)
    )


def timbre_sequence(clip: AudioClip) -> ComponentSequence:
    """Mean 36-coefficient MFCC over each 2.97 s segment's 256 frames."""
    _, rows = _long_component_vectors(clip, want_rhythm=False, want_timbre=True)
    return ComponentSequence(
        kind="timbre", segment_seconds=SEGMENT_HOP_SECONDS, vectors=np.array(rows)
    )


def arousal(clip: AudioClip) -> tuple[float, float]:
    """(mean, population std) of short-time magnitude over 2.97 s segments.

    Short-time magnitude is the sum of absolute sample values of the
    Hamming-tapered segment; segments hop one second at a time.
    """
    clip = resample_to(clip, CANONICAL_RATE)
    window_len = int(round(AROUSAL_WINDOW_SECONDS * CANONICAL_RATE))
    if clip.samples.size < window_len:
        raise ValueError(f"clip too short for arousal: need >= {AROUSAL_WINDOW_SECONDS} s")
    hop = int(round(SEGMENT_HOP_SECONDS * CANONICAL_RATE))
    starts = frame_starts(clip.samples.size, window_len, hop)
    window = np.hamming(window_len)
    abs_samples = np.abs(clip.samples)  # |x * h| == |x| * h for h >= 0
    magnitudes = np.array([abs_samples[s : s + window_len] @ window for s in starts])
    return float(magnitudes.mean()), float(magnitudes.std())


def structural_change(seq: ComponentSequence, j_values=None) -> dict[int, float]:
    """Mean structural change per window scale j (window of 2**(j-1) segments).

    For each position i, the component vectors of the 2**(j-1) segments before
    i and from i onward are summed, normalized to distributions, and compared
    with the Jensen-Shannon divergence; the per-j feature is the mean over all
    positions where both windows fit. Scales the sequence is too short for are
    omitted with a warning.
    """
    if j_values is None:
        j_values = DEFAULT_J_VALUES[seq.kind]
    vectors = seq.vectors
    n = vectors.shape[0]
    csum = np.vstack([np.zeros(vectors.shape[1]), np.cumsum(vectors, axis=0)])

    out = {}
    for j in j_values:
        if j < 1:
            raise ValueError(f"window scale j must be >= 1, got {j}")
        w = 2 ** (j - 1)
        if n < 2 * w:
            warnings.warn(
                f"{seq.kind} sequence of {n} segments too short for scale j={j} "
                f"(needs {2 * w}); omitted"
            )
            continue
        idx = np.arange(w, n - w + 1)
        left = rows_to_distributions(csum[idx] - csum[idx - w])
        right = rows_to_distributions(csum[idx + w] - csum[idx])
        out[j] = float(np.clip(jsd_rows(left, right), 0.0, 1.0).mean())
    return out


def _required_duration_s(kind: str, j: int) -> float:
    w = 2 ** (j - 1)
    if kind == "chroma":
        return 2 * w * CHROMA_SEGMENT_SECONDS
    # 2w hop-spaced segments, the last one SEGMENT_LEN long
    return (2 * w - 1) * SEGMENT_HOP_SECONDS + SEGMENT_LEN / CANONICAL_RATE


def complexity_vector(clip: AudioClip) -> ComplexityFeatureVector:
    """All 20 complexity features of one clip, in fixed order.

    The clip must be long enough for every window scale (about 66 s); the
    error for a too-short clip lists exactly the features that cannot be
    computed.
    """
    clip = resample_to(clip, CANONICAL_RATE)
    n = clip.samples.size
    n_chroma = n // int(round(CHROMA_SEGMENT_SECONDS * CANONICAL_RATE))
    n_long = 0
    if n >= SEGMENT_LEN:
        n_long = (n - SEGMENT_LEN) // int(round(SEGMENT_HOP_SECONDS * CANONICAL_RATE)) + 1

    missing = []
    for rank, j in enumerate(DEFAULT_J_VALUES["chroma"], start=1):
        if n_chroma < 2 ** j:  # 2 * 2**(j-1)
            missing.append(f"ChromaSC{rank} (needs {_required_duration_s('chroma', j):.2f} s)")
    for rank, j in enumerate(DEFAULT_J_VALUES["rhythm"], start=1):
        if n_long < 2 ** j:
            needed = _required_duration_s("rhythm", j)
            missing.append(f"RhythmSC{rank} (needs {needed:.2f} s)")
            missing.append(f"TimbreSC{rank} (needs {needed:.2f} s)")
    if missing:
        raise ValueError(
            f"clip of {n / CANONICAL_RATE:.2f} s too short for: " + ", ".join(missing)
        )

    chroma_sc = structural_change(chroma_sequence(clip))
    rhythm_rows, timbre_rows = _long_component_vectors(clip, want_rhythm=True, want_timbre=True)
    rhythm_sc = structural_change(
        ComponentSequence("rhythm", SEGMENT_HOP_SECONDS, np.array(rhythm_rows))
    )
    timbre_sc = structural_change(
        ComponentSequence("timbre", SEGMENT_HOP_SECONDS, np.array(timbre_rows))
    )
    arousal_mean, arousal_std = arousal(clip)

    values = (
        [chroma_sc[j] for j in DEFAULT_J_VALUES["chroma"]]
        + [rhythm_sc[j] for j in DEFAULT_J_VALUES["rhythm"]]
        + [timbre_sc[j] for j in DEFAULT_J_VALUES["timbre"]]
        + [arousal_mean, arousal_std]
    )
    return ComplexityFeatureVector(values=np.array(values))
