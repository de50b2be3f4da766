"""Shared fixture builders: WAV encoding, tone/chord synthesis, and synthetic
chart construction."""

import struct
from datetime import date, timedelta

import numpy as np

RATE = 44100

# integer-Hz approximations of one octave of 12-TET pitches above A4; integer
# frequencies make 1-second blocks exactly periodic, so clips can be tiled
SEMITONE_FREQS = [round(440.0 * 2 ** (k / 12.0)) for k in range(12)]


def wav_bytes_from_int16(ints, rate=RATE, channels=1) -> bytes:
    """Hand-built RIFF/WAVE PCM16 stream (interleaved if stereo)."""
    data = np.asarray(ints, dtype="<i2").tobytes()
    byte_rate = rate * channels * 2
    header = b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE"
    fmt = b"fmt " + struct.pack("<IHHIIHH", 16, 1, channels, rate, byte_rate, channels * 2, 16)
    return header + fmt + b"data" + struct.pack("<I", len(data)) + data


def wav_bytes(samples, rate=RATE) -> bytes:
    ints = np.clip(np.round(np.asarray(samples) * 32768.0), -32768, 32767).astype("<i2")
    return wav_bytes_from_int16(ints, rate=rate, channels=1)


def write_wav(path, samples, rate=RATE) -> None:
    with open(path, "wb") as f:
        f.write(wav_bytes(samples, rate=rate))


def sine(freq, duration_s, rate=RATE, amp=0.3, phase=0.0):
    t = np.arange(int(round(duration_s * rate))) / rate
    return amp * np.sin(2 * np.pi * freq * t + phase)


def chord_block(root: int, rate=RATE) -> np.ndarray:
    """One second of a (root, +4, +7 semitones) triad; exactly 1 s periodic."""
    freqs = [SEMITONE_FREQS[root % 12], SEMITONE_FREQS[(root + 4) % 12],
             SEMITONE_FREQS[(root + 7) % 12]]
    t = np.arange(rate) / rate
    wave = sum(np.sin(2 * np.pi * f * t) for f in freqs)
    return wave / 3.0


_CHORD_CACHE = {}


def chord_wave(root: int) -> np.ndarray:
    if root not in _CHORD_CACHE:
        _CHORD_CACHE[root] = chord_block(root)
    return _CHORD_CACHE[root]


def chord_clip_samples(roots, seconds_per_chord: int, total_seconds: int, amp: float):
    """Concatenate 1 s chord blocks following `roots`, cycling as needed."""
    blocks = []
    i = 0
    while len(blocks) < total_seconds:
        root = roots[i % len(roots)]
        blocks.extend([chord_wave(root)] * seconds_per_chord)
        i += 1
    return amp * np.concatenate(blocks[:total_seconds])


def make_complexity_clip(rng, switching: bool, total_seconds: int = 67,
                         seconds_per_chord: int = 2):
    """A clip whose chord either never changes (low structural change) or
    changes every couple of seconds (high structural change)."""
    amp = rng.uniform(0.2, 0.35)
    if switching:
        n_chords = total_seconds // seconds_per_chord + 2
        roots = rng.integers(0, 12, size=n_chords).tolist()
        return chord_clip_samples(roots, seconds_per_chord, total_seconds, amp)
    root = int(rng.integers(0, 12))
    return chord_clip_samples([root], total_seconds, total_seconds, amp)


def chart_csv_text(songs, max_rank=100, start=date(2010, 1, 2)) -> str:
    """Build a valid weekly chart CSV from desired per-song score trajectories.

    `songs` is a list of dicts with song_id, debut_week (int index), and
    scores (desired rank scores, one per charted week). Desired scores map to
    ranks; colliding ranks within a week are nudged to the nearest free slot.
    """
    weekly: dict[int, list[tuple[str, int]]] = {}
    for song in songs:
        for k, score in enumerate(song["scores"]):
            score = int(min(max(round(score), 1), max_rank))
            weekly.setdefault(song["debut_week"] + k, []).append((song["song_id"], score))

    lines = ["week,rank,song_id,title,artist"]
    for week_idx in sorted(weekly):
        wishes = weekly[week_idx]
        if len(wishes) > max_rank:
            raise ValueError(f"week {week_idx}: {len(wishes)} songs exceed max_rank {max_rank}")
        week = start + timedelta(weeks=week_idx)
        taken = set()
        for song_id, score in sorted(wishes, key=lambda x: (-x[1], x[0])):
            rank = max_rank - score + 1
            step = 0
            while True:
                for candidate in (rank + step, rank - step):
                    if 1 <= candidate <= max_rank and candidate not in taken:
                        rank = candidate
                        break
                else:
                    step += 1
                    continue
                break
            taken.add(rank)
            lines.append(f"{week.isoformat()},{rank},{song_id},t,a")
    return "\n".join(lines) + "\n"


def trajectory(rng, length: int, level: float, jitter: float = 4.0):
    """A plausible rank-score arc around `level`: rises, plateaus, decays."""
    shape = np.concatenate([
        np.linspace(0.7, 1.0, max(length // 3, 1)),
        np.ones(max(length - 2 * (length // 3), 1)),
        np.linspace(1.0, 0.6, max(length // 3, 1)),
    ])[:length]
    values = level * shape + rng.normal(0.0, jitter, size=length)
    return np.clip(np.round(values), 1, 100).astype(int).tolist()
