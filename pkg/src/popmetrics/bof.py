"""Bag-of-frames MFCC features.

Each song becomes a stream of 20-coefficient MFCC vectors (25 ms frames every
10 ms). A 32-centroid k-means codebook is learned from the pooled training
frames; a song's feature vector is the normalized histogram of its frames'
nearest centroids.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from scipy.fft import dct

from .dsp import (
    CANONICAL_RATE,
    LOG_ENERGY_FLOOR,
    AudioClip,
    frame_matrix,
    mel_filterbank,
    resample_to,
)

BOF_WINDOW_SECONDS = 0.025
BOF_HOP_SECONDS = 0.01
BOF_MEL_BANDS = 36
BOF_N_COEFFS = 20
BOF_K = 32
KMEANS_MAX_ITER = 300

BOF_FEATURE_NAMES = [f"BOF{i}" for i in range(1, BOF_K + 1)]


@dataclass
class BofCodebook:
    centroids: np.ndarray  # (k, dim)
    seed: int
    inertia: float
    n_iter: int
    inertia_history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.centroids = np.asarray(self.centroids, dtype=np.float64)
        if not np.all(np.isfinite(self.centroids)):
            raise ValueError("codebook centroids must be finite")

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "n_iter": self.n_iter,
                "inertia": self.inertia,
                "centroids": self.centroids.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "BofCodebook":
        d = json.loads(text)
        return cls(
            centroids=np.array(d["centroids"]),
            seed=int(d["seed"]),
            inertia=float(d["inertia"]),
            n_iter=int(d["n_iter"]),
        )


@dataclass
class BofFeatureVector:
    frequencies: np.ndarray  # (k,), non-negative, sums to 1

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=np.float64)
        if np.any(self.frequencies < 0) or abs(self.frequencies.sum() - 1.0) > 1e-9:
            raise ValueError("frequencies must be non-negative and sum to 1")


def extract_mfcc_frames(clip: AudioClip) -> np.ndarray:
    """Per-frame MFCC vectors, shape (n_frames, 20).

    25 ms Hamming-tapered frames every 10 ms, 36 mel bands, first 20
    cepstral coefficients. Spectra are computed in float32 (extraction is the
    hot path); the returned coefficients are float64.
    """
    clip = resample_to(clip, CANONICAL_RATE)
    frame_len = int(round(BOF_WINDOW_SECONDS * CANONICAL_RATE))
    hop_len = int(round(BOF_HOP_SECONDS * CANONICAL_RATE))
    if clip.samples.size < frame_len:
        raise ValueError(f"clip too short for MFCC frames: need >= {BOF_WINDOW_SECONDS} s")
    frames = frame_matrix(clip.samples.astype(np.float32), frame_len, hop_len)
    frames *= np.hamming(frame_len).astype(np.float32)
    mags = np.abs(np.fft.rfft(frames, axis=-1))
    weights = mel_filterbank(mags.shape[1], CANONICAL_RATE, BOF_MEL_BANDS).astype(np.float32)
    energies = mags @ weights.T
    coeffs = dct(np.log(energies + LOG_ENERGY_FLOOR), type=2, axis=-1)[:, :BOF_N_COEFFS]
    return coeffs.astype(np.float64)


def _sq_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # (n, k) squared Euclidean distances via the expanded product
    sq = (
        np.sum(points**2, axis=1)[:, None]
        - 2.0 * points @ centroids.T
        + np.sum(centroids**2, axis=1)[None, :]
    )
    return np.maximum(sq, 0.0)


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    closest = np.sum((points - centroids[0]) ** 2, axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            # all remaining mass on already-chosen points; pick uniformly
            centroids[c] = points[rng.integers(n)]
            continue
        idx = rng.choice(n, p=closest / total)
        centroids[c] = points[idx]
        closest = np.minimum(closest, np.sum((points - centroids[c]) ** 2, axis=1))
    return centroids


def fit_codebook(frames: np.ndarray, k: int = BOF_K, seed: int = 0) -> BofCodebook:
    """Deterministic k-means codebook: k-means++ seeding from `seed`, Lloyd
    iterations to an assignment fixpoint (or 300 iterations).

    Any cluster left empty is reseeded to the point currently farthest from
    its own centroid. Requires at least k distinct vectors.
    """
    points = np.asarray(frames, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("frames must be a 2-D (n, dim) array")
    if np.unique(points, axis=0).shape[0] < k:
        raise ValueError(f"need at least {k} distinct vectors to fit {k} centroids")

    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(points, k, rng)

    assignments = None
    inertia_history = []
    n_iter = 0
    for n_iter in range(1, KMEANS_MAX_ITER + 1):
        dists = _sq_distances(points, centroids)
        new_assignments = np.argmin(dists, axis=1)  # ties go to the lowest index
        closest = dists[np.arange(points.shape[0]), new_assignments]

        # reseed empty clusters to the worst-served point
        counts = np.bincount(new_assignments, minlength=k)
        for empty in np.where(counts == 0)[0]:
            far = int(np.argmax(closest))
            centroids[empty] = points[far]
            new_assignments[far] = empty
            closest[far] = 0.0
            counts = np.bincount(new_assignments, minlength=k)

        inertia_history.append(float(closest.sum()))
        if assignments is not None and np.array_equal(assignments, new_assignments):
            break
        assignments = new_assignments
        for c in range(k):
            members = points[assignments == c]
            if members.shape[0]:
                centroids[c] = members.mean(axis=0)

    return BofCodebook(
        centroids=centroids,
        seed=seed,
        inertia=inertia_history[-1],
        n_iter=n_iter,
        inertia_history=inertia_history,
    )


def bof_features(frames: np.ndarray, codebook: BofCodebook) -> BofFeatureVector:
    """Normalized histogram of nearest-centroid assignments (ties to the
    lowest centroid index)."""
    points = np.asarray(frames, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("need at least one frame")
    assignments = np.argmin(_sq_distances(points, codebook.centroids), axis=1)
    counts = np.bincount(assignments, minlength=codebook.k)
    return BofFeatureVector(frequencies=counts / points.shape[0])
