"""The eight popularity metrics summarizing one song's rank-score history.

Debut, Max, Mean, Std, Length and Sum capture levels and duration; Skewness
and Kurtosis capture the shape of how popularity grows and decays. Moments use
the population (1/N) convention and kurtosis is excess kurtosis, so a normal
bell shape scores 0.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, asdict

import numpy as np

from .chart import SongHistory

METRIC_NAMES = ["debut", "max", "mean", "std", "length", "sum", "skewness", "kurtosis"]

MIN_WEEKS_FOR_METRICS = 3


@dataclass(frozen=True)
class PopularityMetrics:
    song_id: str
    debut: int
    max: int
    mean: float
    std: float
    length: int
    sum: int
    skewness: float
    kurtosis: float
    degenerate: bool  # all rank scores equal: skewness/kurtosis undefined, reported as 0

    def value(self, name: str) -> float:
        if name not in METRIC_NAMES:
            raise ValueError(f"unknown metric {name!r}; expected one of {METRIC_NAMES}")
        return getattr(self, name)


def compute_metrics(history: SongHistory) -> PopularityMetrics:
    """Compute all eight metrics from one rank-score sequence.

    Requires at least three charted weeks (the ingest filter's default
    threshold); shorter sequences raise ValueError.
    """
    scores = np.asarray(history.rank_scores, dtype=np.float64)
    n = scores.size
    if n < MIN_WEEKS_FOR_METRICS:
        raise ValueError(
            f"song {history.song_id!r}: need >= {MIN_WEEKS_FOR_METRICS} weeks, got {n}"
        )

    mean = float(scores.mean())
    centered = scores - mean
    m2 = float(np.mean(centered**2))
    std = float(np.sqrt(m2))
    degenerate = std == 0.0
    if degenerate:
        skewness = 0.0
        kurtosis = 0.0
    else:
        m3 = float(np.mean(centered**3))
        m4 = float(np.mean(centered**4))
        skewness = m3 / std**3
        kurtosis = m4 / m2**2 - 3.0

    return PopularityMetrics(
        song_id=history.song_id,
        debut=int(history.rank_scores[0]),
        max=int(history.rank_scores.max()),
        mean=mean,
        std=std,
        length=n,
        sum=int(history.rank_scores.sum()),
        skewness=skewness,
        kurtosis=kurtosis,
        degenerate=degenerate,
    )


def compute_all_metrics(histories: list[SongHistory]) -> list[PopularityMetrics]:
    return [compute_metrics(h) for h in histories]


def metrics_to_csv(metrics: list[PopularityMetrics], stream) -> None:
    """Write metric rows keyed by song_id, one column per metric."""
    writer = csv.writer(stream)
    writer.writerow(["song_id"] + METRIC_NAMES + ["degenerate"])
    for m in metrics:
        writer.writerow(
            [m.song_id]
            + [repr(getattr(m, name)) if isinstance(getattr(m, name), float) else getattr(m, name)
               for name in METRIC_NAMES]
            + [int(m.degenerate)]
        )


def metrics_from_csv(stream) -> list[PopularityMetrics]:
    reader = csv.DictReader(stream)
    out = []
    for row in reader:
        out.append(
            PopularityMetrics(
                song_id=row["song_id"],
                debut=int(row["debut"]),
                max=int(row["max"]),
                mean=float(row["mean"]),
                std=float(row["std"]),
                length=int(row["length"]),
                sum=int(row["sum"]),
                skewness=float(row["skewness"]),
                kurtosis=float(row["kurtosis"]),
                degenerate=bool(int(row["degenerate"])),
            )
        )
    return out


def metrics_to_json(metrics: list[PopularityMetrics]) -> str:
    return json.dumps([asdict(m) for m in metrics], indent=2)
