"""Per-client timelines: episodes, tenure, usage percentage, inter-episode gaps."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date
from functools import cached_property
from typing import Iterable

import numpy as np

DEFAULT_GAP_DAYS = 30


@dataclass(frozen=True)
class GapPolicy:
    """Consecutive stays closer than ``gap_days`` belong to the same episode."""

    gap_days: int = DEFAULT_GAP_DAYS

    def __post_init__(self) -> None:
        if isinstance(self.gap_days, bool) or int(self.gap_days) != self.gap_days:
            raise ValueError(f"gap_days must be an integer, got {self.gap_days!r}")
        if self.gap_days < 1:
            raise ValueError(f"gap_days must be >= 1, got {self.gap_days}")


@dataclass(frozen=True)
class ClientTimeline:
    """Distinct stay dates of one client, strictly increasing."""

    client_id: str
    stay_dates: tuple[date, ...]

    def __post_init__(self) -> None:
        if not self.client_id:
            raise ValueError("client_id must be non-empty")
        if not self.stay_dates:
            raise ValueError(f"timeline for {self.client_id!r} has no stays")
        object.__setattr__(self, "stay_dates", tuple(self.stay_dates))
        for a, b in zip(self.stay_dates, self.stay_dates[1:]):
            if not a < b:
                raise ValueError(
                    f"stay dates for {self.client_id!r} must be strictly increasing "
                    f"({a} followed by {b})"
                )

    @classmethod
    def from_dates(cls, client_id: str, dates: Iterable[date]) -> "ClientTimeline":
        """Build a timeline from unordered, possibly repeated dates."""
        return cls(client_id, tuple(sorted(set(dates))))

    @cached_property
    def days(self) -> np.ndarray:
        """Stay dates as proleptic ordinals (read-only int64 array)."""
        arr = np.fromiter((d.toordinal() for d in self.stay_dates), dtype=np.int64,
                          count=len(self.stay_dates))
        arr.flags.writeable = False
        return arr

    @property
    def n_stays(self) -> int:
        return len(self.stay_dates)

    @property
    def first(self) -> date:
        return self.stay_dates[0]

    @property
    def last(self) -> date:
        return self.stay_dates[-1]

    def truncate(self, through: date) -> "ClientTimeline":
        """Timeline restricted to stays on or before ``through``."""
        kept = tuple(d for d in self.stay_dates if d <= through)
        return ClientTimeline(self.client_id, kept)


@dataclass(frozen=True)
class Episode:
    start: date
    end: date
    stay_count: int = field(default=1)

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError(f"episode start {self.start} after end {self.end}")
        if self.stay_count < 1:
            raise ValueError("episode must contain at least one stay")

    @property
    def span_days(self) -> int:
        """Inclusive length in days, ``(end - start) + 1``."""
        return (self.end - self.start).days + 1


def episode_bounds(days: np.ndarray, gap_days: int) -> list[tuple[int, int]]:
    """Index ranges ``(first, last)`` of each episode in a sorted ordinal array."""
    if len(days) == 0:
        return []
    breaks = np.flatnonzero(np.diff(days) >= gap_days)
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [len(days) - 1]))
    return [(int(s), int(e)) for s, e in zip(starts, ends)]


def segment_episodes(timeline: ClientTimeline, policy: GapPolicy | None = None) -> list[Episode]:
    """Split a timeline into maximal runs whose consecutive-stay gaps are below the policy.

    A separation of exactly ``gap_days`` starts a new episode.
    """
    policy = policy or GapPolicy()
    dates = timeline.stay_dates
    return [
        Episode(dates[s], dates[e], e - s + 1)
        for s, e in episode_bounds(timeline.days, policy.gap_days)
    ]


def count_episodes(timeline: ClientTimeline, policy: GapPolicy | None = None) -> int:
    policy = policy or GapPolicy()
    return 1 + int(np.count_nonzero(np.diff(timeline.days) >= policy.gap_days))


def tenure(timeline: ClientTimeline) -> int:
    """Inclusive days from first to last stay; a single stay gives 1."""
    return (timeline.last - timeline.first).days + 1


def usage_percentage(timeline: ClientTimeline) -> float:
    """Fraction of tenure days spent in shelter, in (0, 1]."""
    return timeline.n_stays / tenure(timeline)


def inter_episode_gaps(episodes: list[Episode]) -> list[int]:
    """Days from the end of each episode to the start of the next."""
    return [(b.start - a.end).days for a, b in zip(episodes, episodes[1:])]
