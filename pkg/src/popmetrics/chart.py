"""Weekly chart ingestion: CSV parsing, per-song rank-score histories, eligibility filter.

A chart file is a UTF-8 CSV with header ``week,rank,song_id,title,artist``;
dates are ISO-8601. Rank 1 is the top of the chart. Internally every rank is
inverted to a *rank score* (``max_rank - rank + 1``) so that larger means more
popular.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from datetime import date

import numpy as np

CHART_HEADER = ["week", "rank", "song_id", "title", "artist"]


class ChartFormatError(ValueError):
    """Raised for malformed chart files or inconsistent chart entries."""


@dataclass(frozen=True)
class ChartEntry:
    """One row of a weekly chart."""

    week: date
    rank: int
    song_id: str
    title: str = ""
    artist: str = ""


@dataclass
class SongHistory:
    """Ordered weekly rank-score sequence of one song.

    ``rank_scores[i]`` is the inverted rank for ``weeks[i]``. Weeks are strictly
    increasing but need not be contiguous: a song that drops out of the chart
    and re-enters keeps a single history with a gap.
    """

    song_id: str
    weeks: list[date]
    rank_scores: np.ndarray
    max_rank: int

    def __post_init__(self):
        self.rank_scores = np.asarray(self.rank_scores, dtype=np.int64)
        if len(self.weeks) != len(self.rank_scores) or len(self.weeks) == 0:
            raise ChartFormatError(
                f"song {self.song_id!r}: weeks and rank_scores must be equal-length and non-empty"
            )
        for a, b in zip(self.weeks, self.weeks[1:]):
            if a >= b:
                raise ChartFormatError(f"song {self.song_id!r}: weeks not strictly increasing")
        if np.any(self.rank_scores < 1) or np.any(self.rank_scores > self.max_rank):
            raise ChartFormatError(
                f"song {self.song_id!r}: rank scores outside [1, {self.max_rank}]"
            )

    @property
    def n_weeks(self) -> int:
        return len(self.weeks)

    @property
    def debut_week(self) -> date:
        return self.weeks[0]

    @property
    def last_week(self) -> date:
        return self.weeks[-1]


def rank_to_score(rank: int, max_rank: int) -> int:
    """Invert a chart rank so the top of the chart gets the largest score."""
    return max_rank - rank + 1


def parse_chart_csv(text, max_rank: int) -> list[ChartEntry]:
    """Parse a chart CSV (string or text stream) into validated entries.

    Raises ChartFormatError naming the offending 1-based line number on a
    malformed row: wrong column count, non-integer rank, rank outside
    [1, max_rank], unparseable date, or a duplicated (week, rank) pair.
    """
    if max_rank < 1:
        raise ChartFormatError(f"max_rank must be >= 1, got {max_rank}")
    stream = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.reader(stream)

    try:
        header = next(reader)
    except StopIteration:
        raise ChartFormatError("empty chart file") from None
    if [h.strip() for h in header] != CHART_HEADER:
        raise ChartFormatError(
            f"line 1: expected header {','.join(CHART_HEADER)!r}, got {','.join(header)!r}"
        )

    entries = []
    seen = set()
    for lineno, row in enumerate(reader, start=2):
        if len(row) != 5:
            raise ChartFormatError(f"line {lineno}: expected 5 columns, got {len(row)}")
        week_s, rank_s, song_id, title, artist = row
        try:
            week = date.fromisoformat(week_s.strip())
        except ValueError:
            raise ChartFormatError(f"line {lineno}: bad ISO date {week_s!r}") from None
        try:
            rank = int(rank_s)
        except ValueError:
            raise ChartFormatError(f"line {lineno}: non-integer rank {rank_s!r}") from None
        if not 1 <= rank <= max_rank:
            raise ChartFormatError(
                f"line {lineno}: rank {rank} outside [1, {max_rank}]"
            )
        if (week, rank) in seen:
            raise ChartFormatError(
                f"line {lineno}: duplicate (week, rank) pair ({week}, {rank})"
            )
        seen.add((week, rank))
        entries.append(ChartEntry(week=week, rank=rank, song_id=song_id, title=title, artist=artist))
    return entries


def assemble_histories(entries: list[ChartEntry], max_rank: int) -> list[SongHistory]:
    """Group chart entries into one SongHistory per song_id.

    Weeks are sorted ascending and every rank is inverted to a rank score.
    Histories come out in order of each song's first appearance in `entries`.
    Raises ChartFormatError if a song is listed twice in the same week.
    """
    by_song: dict[str, list[ChartEntry]] = {}
    for e in entries:
        by_song.setdefault(e.song_id, []).append(e)

    histories = []
    for song_id, rows in by_song.items():
        rows = sorted(rows, key=lambda e: e.week)
        for a, b in zip(rows, rows[1:]):
            if a.week == b.week:
                raise ChartFormatError(
                    f"song {song_id!r} appears twice in week {a.week}"
                )
        histories.append(
            SongHistory(
                song_id=song_id,
                weeks=[e.week for e in rows],
                rank_scores=np.array([rank_to_score(e.rank, max_rank) for e in rows]),
                max_rank=max_rank,
            )
        )
    return histories


def filter_min_weeks(histories: list[SongHistory], min_weeks: int = 3) -> list[SongHistory]:
    """Keep only songs that charted for at least `min_weeks` weeks.

    Short-lived songs make several of the popularity metrics unreliable, so by
    default anything that appeared fewer than three weeks is dropped.
    """
    if min_weeks < 1:
        raise ValueError(f"min_weeks must be >= 1, got {min_weeks}")
    return [h for h in histories if h.n_weeks >= min_weeks]


def load_chart(path, max_rank: int, min_weeks: int = 3) -> list[SongHistory]:
    """Convenience: parse a chart file and return filtered histories."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        entries = parse_chart_csv(f, max_rank)
    return filter_min_weeks(assemble_histories(entries, max_rank), min_weeks)


def histories_to_json(histories: list[SongHistory]) -> list[dict]:
    return [
        {
            "song_id": h.song_id,
            "weeks": [w.isoformat() for w in h.weeks],
            "rank_scores": [int(s) for s in h.rank_scores],
            "max_rank": h.max_rank,
        }
        for h in histories
    ]


def histories_from_json(records: list[dict]) -> list[SongHistory]:
    return [
        SongHistory(
            song_id=r["song_id"],
            weeks=[date.fromisoformat(w) for w in r["weeks"]],
            rank_scores=np.array(r["rank_scores"]),
            max_rank=int(r["max_rank"]),
        )
        for r in records
    ]
