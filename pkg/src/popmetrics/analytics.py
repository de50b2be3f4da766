"""Aggregate chart analyses: metric histograms, per-period cumulative
distributions, debut-vs-peak relationships, and model agreement matrices.

Everything here returns plain data suitable for CSV export; plotting is left
to external tools.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date

import numpy as np

from .chart import SongHistory
from .metrics import PopularityMetrics, compute_metrics


@dataclass
class Histogram:
    bin_edges: np.ndarray  # len(bins) + 1, strictly increasing
    counts: np.ndarray

    @property
    def n_samples(self) -> int:
        return int(self.counts.sum())


@dataclass
class CumulativeDistribution:
    values: np.ndarray            # sorted ascending
    cumulative_fraction: np.ndarray  # non-decreasing, ends at 1 when non-empty


def metric_histogram(values, bin_edges) -> Histogram:
    """Bin values into half-open bins [e_k, e_{k+1}); the last bin is closed.

    Out-of-range values are ignored. Edges must be strictly increasing.
    """
    edges = np.asarray(bin_edges, dtype=np.float64)
    if edges.size < 2:
        raise ValueError("need at least one bin interval (two edges)")
    if np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must be strictly increasing")
    counts, _ = np.histogram(np.asarray(values, dtype=np.float64), bins=edges)
    return Histogram(bin_edges=edges, counts=counts)


def empirical_cdf(values) -> CumulativeDistribution:
    v = np.sort(np.asarray(values, dtype=np.float64))
    n = v.size
    frac = np.arange(1, n + 1, dtype=np.float64) / n if n else np.empty(0)
    return CumulativeDistribution(values=v, cumulative_fraction=frac)


def decadal_cdf(
    histories: list[SongHistory],
    periods: list[tuple[date, date]],
    metric: str,
) -> dict[tuple[date, date], CumulativeDistribution]:
    """Per-period empirical CDF of one metric.

    A song counts toward a period only when both its first and last chart week
    fall inside that period (inclusive), so songs spanning a boundary are
    excluded everywhere. Periods must be pairwise disjoint.
    """
    for start, end in periods:
        if start > end:
            raise ValueError(f"period {start}..{end} has start after end")
    ordered = sorted(periods)
    for (s1, e1), (s2, e2) in zip(ordered, ordered[1:]):
        if s2 <= e1:
            raise ValueError(f"periods {s1}..{e1} and {s2}..{e2} overlap")

    out = {}
    for start, end in periods:
        vals = [
            compute_metrics(h).value(metric)
            for h in histories
            if start <= h.debut_week and h.last_week <= end
        ]
        out[(start, end)] = empirical_cdf(vals)
    return out


def debut_vs_max_profile(
    metrics: list[PopularityMetrics],
) -> dict[int, tuple[float, float, int]]:
    """Group songs by exact debut score; report (mean of Max, std of Max, count).

    Std is the population standard deviation, so singleton groups report 0.
    """
    if not metrics:
        raise ValueError("no metrics given")
    groups: dict[int, list[int]] = {}
    for m in metrics:
        groups.setdefault(m.debut, []).append(m.max)
    return {
        debut: (float(np.mean(maxes)), float(np.std(maxes)), len(maxes))
        for debut, maxes in sorted(groups.items())
    }


def top_rank_proportion_by_debut(
    metrics: list[PopularityMetrics], max_rank: int
) -> dict[int, float]:
    """Per debut score, the fraction of songs whose Max reached the top rank."""
    if not metrics:
        raise ValueError("no metrics given")
    groups: dict[int, list[bool]] = {}
    for m in metrics:
        groups.setdefault(m.debut, []).append(m.max == max_rank)
    return {debut: float(np.mean(flags)) for debut, flags in sorted(groups.items())}


def group_agreement_matrix(correct_a, correct_b) -> np.ndarray:
    """2x2 proportion matrix of per-sample correctness of two predictors.

    Rows index predictor a (hit, miss), columns predictor b, so [0, 0] is the
    fraction both got right. Cells sum to 1.
    """
    a = np.asarray(correct_a, dtype=bool)
    b = np.asarray(correct_b, dtype=bool)
    if a.shape != b.shape or a.size == 0:
        raise ValueError(f"inputs must be equal-length and non-empty, got {a.size} and {b.size}")
    n = a.size
    matrix = np.array(
        [
            [np.sum(a & b), np.sum(a & ~b)],
            [np.sum(~a & b), np.sum(~a & ~b)],
        ],
        dtype=np.float64,
    )
    return matrix / n


# Published distribution statistics for the Billboard Hot 100, 1970-2014 era
# (mean Debut, median Debut, mean Kurtosis). Used by the optional real-data
# check mode; results are data-dependent and not part of the test suite gate.
BILLBOARD_1970_2014_REFERENCE = {
    "debut_mean": 21.8,
    "debut_median": 16.0,
    "kurtosis_mean": -0.62,
}


def reference_stats_check(
    metrics: list[PopularityMetrics], rel_tol: float = 0.05
) -> dict[str, dict]:
    """Compare dataset statistics against the 1970-2014 reference values.

    Returns per-statistic observed/reference/pass entries at +/- rel_tol.
    """
    if not metrics:
        raise ValueError("no metrics given")
    debuts = np.array([m.debut for m in metrics], dtype=np.float64)
    kurts = np.array([m.kurtosis for m in metrics], dtype=np.float64)
    observed = {
        "debut_mean": float(debuts.mean()),
        "debut_median": float(np.median(debuts)),
        "kurtosis_mean": float(kurts.mean()),
    }
    report = {}
    for key, ref in BILLBOARD_1970_2014_REFERENCE.items():
        obs = observed[key]
        ok = abs(obs - ref) <= rel_tol * abs(ref)
        report[key] = {"observed": obs, "reference": ref, "pass": ok}
    return report
