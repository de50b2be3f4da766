"""Deterministic audio primitives: WAV decoding, framing, windowing, spectra,
mel filterbanks, and MFCCs.

All operations are pure and bit-reproducible. The canonical internal format is
44.1 kHz mono with samples in [-1, 1]; `resample_to` converts anything else by
linear interpolation, which is plenty for the coarse statistical features built
on top of these primitives.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dct

CANONICAL_RATE = 44100
LOG_ENERGY_FLOOR = 1e-10


class WavFormatError(ValueError):
    """Raised for WAV byte streams this decoder cannot handle."""


@dataclass
class AudioClip:
    sample_rate: int
    samples: np.ndarray  # mono float64 in [-1, 1]

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples contain non-finite values")
        if np.max(np.abs(self.samples)) > 1.0 + 1e-9:
            raise ValueError("samples must lie in [-1, 1]")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def decode_wav(data: bytes) -> AudioClip:
    """Decode a RIFF/WAVE PCM 16-bit byte stream to a mono AudioClip.

    Stereo is averaged to mono; samples are scaled by 1/32768. Anything that
    is not 1- or 2-channel 16-bit PCM raises WavFormatError.
    """
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError("not a RIFF/WAVE stream")

    fmt = None
    pcm_bytes = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise WavFormatError("truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            if len(body) < chunk_size:
                raise WavFormatError("truncated data chunk")
            pcm_bytes = body
        pos += 8 + chunk_size + (chunk_size & 1)  # chunks are word-aligned

    if fmt is None:
        raise WavFormatError("missing fmt chunk")
    if pcm_bytes is None:
        raise WavFormatError("missing data chunk")
    audio_format, n_channels, sample_rate, _, _, bits = fmt
    if audio_format != 1:
        raise WavFormatError(f"unsupported (non-PCM) audio format tag {audio_format}")
    if bits != 16:
        raise WavFormatError(f"unsupported bit depth {bits}, only 16-bit PCM is handled")
    if n_channels not in (1, 2):
        raise WavFormatError(f"unsupported channel count {n_channels}")
    if len(pcm_bytes) % (2 * n_channels) != 0:
        raise WavFormatError("PCM data length is not a whole number of frames")

    raw = np.frombuffer(pcm_bytes, dtype="<i2").astype(np.float64)
    if n_channels == 2:
        raw = raw.reshape(-1, 2).mean(axis=1)
    if raw.size == 0:
        raise WavFormatError("empty data chunk")
    return AudioClip(sample_rate=sample_rate, samples=raw / 32768.0)


def read_wav(path) -> AudioClip:
    with open(path, "rb") as f:
        return decode_wav(f.read())


def resample_to(clip: AudioClip, target: int = CANONICAL_RATE) -> AudioClip:
    """Resample by linear interpolation; identity when rates already match."""
    if target <= 0:
        raise ValueError(f"target rate must be positive, got {target}")
    if clip.sample_rate == target:
        return clip
    n = clip.samples.size
    m = int(round(n * target / clip.sample_rate))
    positions = np.arange(m) * (clip.sample_rate / target)
    resampled = np.interp(positions, np.arange(n), clip.samples)
    return AudioClip(sample_rate=target, samples=resampled)


def frame_starts(n_samples: int, frame_len: int, hop_len: int) -> np.ndarray:
    """Start indices of full frames; trailing partial frames are dropped."""
    if frame_len > n_samples:
        return np.empty(0, dtype=np.int64)
    n_frames = (n_samples - frame_len) // hop_len + 1
    return np.arange(n_frames, dtype=np.int64) * hop_len


def frame_matrix(samples: np.ndarray, frame_len: int, hop_len: int) -> np.ndarray:
    """All full frames as rows of an (n_frames, frame_len) view."""
    starts = frame_starts(samples.size, frame_len, hop_len)
    if starts.size == 0:
        return np.empty((0, frame_len))
    windows = np.lib.stride_tricks.sliding_window_view(samples, frame_len)
    return windows[starts]


def frame_signal(clip: AudioClip, window_seconds: float, hop_seconds: float) -> np.ndarray:
    """Slice a clip into frames of round(window*rate) samples every
    round(hop*rate) samples. Returns an (n_frames, frame_len) array.

    The clip must be at least one window long; no tail padding is done.
    """
    if not (window_seconds >= hop_seconds > 0):
        raise ValueError(
            f"need window_seconds >= hop_seconds > 0, got {window_seconds}, {hop_seconds}"
        )
    frame_len = int(round(window_seconds * clip.sample_rate))
    hop_len = int(round(hop_seconds * clip.sample_rate))
    if frame_len > clip.samples.size:
        raise ValueError(
            f"clip of {clip.samples.size} samples is shorter than one "
            f"{frame_len}-sample window"
        )
    return frame_matrix(clip.samples, frame_len, hop_len)


def hamming_window(frame: np.ndarray) -> np.ndarray:
    """Apply the Hamming taper 0.54 - 0.46*cos(2*pi*n/(N-1)) along the last axis."""
    frame = np.asarray(frame, dtype=np.float64)
    n = frame.shape[-1]
    if n < 2:
        raise ValueError("frame must have at least 2 samples")
    return frame * np.hamming(n)


def magnitude_spectrum(frame: np.ndarray) -> np.ndarray:
    """One-sided DFT magnitudes along the last axis; bin k is k*rate/N Hz."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape[-1] < 2:
        raise ValueError("frame must have at least 2 samples")
    return np.abs(np.fft.rfft(frame, axis=-1))


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=32)
def mel_filterbank(n_bins: int, sample_rate: int, n_bands: int) -> np.ndarray:
    """Triangular mel filter weights, shape (n_bands, n_bins).

    Band centers are equally spaced on the mel scale between 0 Hz and the
    Nyquist frequency; triangles are evaluated at the bin frequencies of an
    even-length frame (n_bins = N/2 + 1).
    """
    if n_bands < 1:
        raise ValueError(f"n_bands must be >= 1, got {n_bands}")
    frame_len = 2 * (n_bins - 1)
    bin_freqs = np.arange(n_bins) * sample_rate / frame_len
    mel_points = np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_bands + 2)
    hz_points = mel_to_hz(mel_points)

    weights = np.zeros((n_bands, n_bins))
    for b in range(n_bands):
        lo, center, hi = hz_points[b], hz_points[b + 1], hz_points[b + 2]
        rising = (bin_freqs - lo) / (center - lo)
        falling = (hi - bin_freqs) / (hi - center)
        weights[b] = np.clip(np.minimum(rising, falling), 0.0, None)
    return weights


def mel_filterbank_energies(spectrum: np.ndarray, sample_rate: int, n_bands: int) -> np.ndarray:
    """Mel band energies of one-sided magnitude spectra (last axis = bins)."""
    spectrum = np.asarray(spectrum, dtype=np.float64)
    weights = mel_filterbank(spectrum.shape[-1], sample_rate, n_bands)
    return spectrum @ weights.T


def mfcc(band_energies: np.ndarray, n_coeffs: int) -> np.ndarray:
    """Cepstral coefficients: type-II DCT of log(energy + floor), coefficients
    0..n_coeffs-1. Uses the unnormalized DCT-II (scipy norm=None) and natural log.
    """
    band_energies = np.asarray(band_energies, dtype=np.float64)
    n_bands = band_energies.shape[-1]
    if n_coeffs > n_bands:
        raise ValueError(f"n_coeffs {n_coeffs} exceeds band count {n_bands}")
    log_e = np.log(band_energies + LOG_ENERGY_FLOOR)
    return dct(log_e, type=2, axis=-1)[..., :n_coeffs]
