"""Independent reference implementations used to derive expected test values.

Everything here is written directly from the defining formulas, in plain
Python loops where possible, and must not import from popmetrics: these are
the second route that the library is checked against.
"""

import math

import numpy as np


def moments_reference(values):
    """Population moments computed term by term from their definitions."""
    values = [float(v) for v in values]
    n = len(values)
    mean = sum(values) / n
    m2 = sum((v - mean) ** 2 for v in values) / n
    m3 = sum((v - mean) ** 3 for v in values) / n
    m4 = sum((v - mean) ** 4 for v in values) / n
    std = math.sqrt(m2)
    if std == 0.0:
        skewness, kurtosis = 0.0, 0.0
    else:
        skewness = m3 / std**3
        kurtosis = m4 / m2**2 - 3.0
    return {
        "debut": values[0],
        "max": max(values),
        "mean": mean,
        "std": std,
        "length": n,
        "sum": sum(values),
        "skewness": skewness,
        "kurtosis": kurtosis,
    }


def kl_base2_reference(p, q):
    total = 0.0
    for pi, qi in zip(p, q):
        if pi > 0.0:
            total += pi * math.log2(pi / qi)
    return total


def jsd_reference(p, q):
    m = [(pi + qi) / 2.0 for pi, qi in zip(p, q)]
    return 0.5 * kl_base2_reference(p, m) + 0.5 * kl_base2_reference(q, m)


def normalize_reference(vec):
    vec = [float(v) for v in vec]
    lowest = min(vec)
    if lowest < 0.0:
        vec = [v - lowest + 1e-9 for v in vec]
    total = sum(vec)
    if total <= 0.0:
        return [1.0 / len(vec)] * len(vec)
    return [v / total for v in vec]


def structural_change_reference(vectors, j):
    """Mean windowed-sum divergence, materializing every window sum."""
    vectors = [list(map(float, row)) for row in vectors]
    n = len(vectors)
    dim = len(vectors[0])
    w = 2 ** (j - 1)
    if n < 2 * w:
        raise ValueError("sequence too short")
    values = []
    for i in range(w, n - w + 1):
        left = [sum(vectors[k][d] for k in range(i - w, i)) for d in range(dim)]
        right = [sum(vectors[k][d] for k in range(i, i + w)) for d in range(dim)]
        values.append(jsd_reference(normalize_reference(left), normalize_reference(right)))
    return sum(values) / len(values)


def dct2_reference(x):
    """Unnormalized type-II DCT: y_k = 2 * sum_n x_n cos(pi k (2n + 1) / (2N))."""
    x = [float(v) for v in x]
    n = len(x)
    return [
        2.0 * sum(x[m] * math.cos(math.pi * k * (2 * m + 1) / (2 * n)) for m in range(n))
        for k in range(n)
    ]


def frame_count_reference(n_samples, frame_len, hop_len):
    if frame_len > n_samples:
        return 0
    return (n_samples - frame_len) // hop_len + 1


def mel_weights_reference(n_bins, sample_rate, n_bands):
    """Triangular mel filters built point by point."""

    def mel(f):
        return 2595.0 * math.log10(1.0 + f / 700.0)

    def inv_mel(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    frame_len = 2 * (n_bins - 1)
    top = mel(sample_rate / 2.0)
    points = [inv_mel(top * i / (n_bands + 1)) for i in range(n_bands + 2)]
    weights = np.zeros((n_bands, n_bins))
    for b in range(n_bands):
        lo, center, hi = points[b], points[b + 1], points[b + 2]
        for k in range(n_bins):
            f = k * sample_rate / frame_len
            if lo < f <= center:
                w = (f - lo) / (center - lo)
            elif center < f < hi:
                w = (hi - f) / (hi - center)
            else:
                w = 0.0
            weights[b, k] = w
    return weights


def nearest_centroid_reference(points, centroids):
    """Exhaustive nearest-centroid assignment, ties to the lowest index."""
    assignments = []
    for p in points:
        best, best_d = 0, None
        for c_idx, c in enumerate(centroids):
            d = sum((pi - ci) ** 2 for pi, ci in zip(p, c))
            if best_d is None or d < best_d:
                best, best_d = c_idx, d
        assignments.append(best)
    return assignments


def balanced_accuracy_reference(tp, tn, fp, fn):
    return 0.5 * (tp / (tp + fn) + tn / (tn + fp))


def pitch_class_reference(freq):
    """Nearest 12-TET pitch class of a frequency, C = 0, A4 = 440 -> 9."""
    return (round(12.0 * math.log2(freq / 440.0)) + 9) % 12
