"""Brute-force reference computations, deliberately independent of the library paths."""

from __future__ import annotations

from datetime import date, timedelta

import numpy as np


def naive_segments(days: list[int], gap: int) -> list[list[int]]:
    segs: list[list[int]] = []
    for d in days:
        if segs and d - segs[-1][-1] < gap:
            segs[-1].append(d)
        else:
            segs.append([d])
    return segs


def naive_referral_day(days: list[int], kind: str, window: int, threshold: int, gap: int) -> int | None:
    """Scan every calendar day and recount the window from scratch (pure Python)."""
    if not days:
        return None
    for d in range(days[0], days[-1] + 1):
        inside = [s for s in days if d - window + 1 <= s <= d]
        if kind == "stays":
            value = len(inside)
        elif kind == "episodes":
            value = len(naive_segments(inside, gap))
        else:
            # span of the episode running through day d; only stay days can qualify
            if d not in days:
                continue
            value = d - naive_segments([s for s in days if s <= d], gap)[-1][0] + 1
            if value >= window:
                return d
            continue
        if value >= threshold:
            return d
    return None


def window_matrix(days: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Every calendar day from first to last stay, and a day-by-stay in-window mask."""
    calendar = np.arange(days[0], days[-1] + 1)
    mask = (days[None, :] >= calendar[:, None] - window + 1) & (days[None, :] <= calendar[:, None])
    return calendar, mask


def matrix_counts(days: np.ndarray, window: int, gap: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per calendar day: stays in window, and episodes among those stays.

    A stay opens a segment unless the previous stay is also inside the window and
    closer than ``gap`` days.
    """
    calendar, mask = window_matrix(days, window)
    stays = mask.sum(axis=1)
    close_prev = np.concatenate(([False], np.diff(days) < gap))
    prev_inside = np.concatenate((np.zeros((len(calendar), 1), bool), mask[:, :-1]), axis=1)
    opens = mask & ~(prev_inside & close_prev[None, :])
    return calendar, stays, opens.sum(axis=1)


def first_day(calendar: np.ndarray, ok: np.ndarray) -> int | None:
    idx = np.flatnonzero(ok)
    return int(calendar[idx[0]]) if idx.size else None


def intersecting_global_episodes(days: list[int], lo: int, hi: int, gap: int) -> int:
    return sum(1 for seg in naive_segments(days, gap) if any(lo <= s <= hi for s in seg))


def interp_percentile(values, q: float) -> float:
    """Linear interpolation at 1-based rank 1 + q(n-1)."""
    v = sorted(values)
    rank = 1 + q * (len(v) - 1)
    lo = int(rank)
    frac = rank - lo
    if lo >= len(v):
        return float(v[-1])
    return v[lo - 1] + frac * (v[lo] - v[lo - 1])


def random_days(rng: np.random.Generator, max_stays: int = 400, max_gap: int = 120) -> list[int]:
    """Bursty stay ordinals: runs of varying density separated by random pauses."""
    target = int(rng.integers(1, max_stays + 1))
    day = date(2010, 1, 1).toordinal() + int(rng.integers(0, 365))
    out = [day]
    while len(out) < target:
        spacing_hi = int(rng.choice([1, 2, 4, 10, 35]))
        for _ in range(int(rng.integers(1, 60))):
            day += int(rng.integers(1, spacing_hi + 1))
            out.append(day)
            if len(out) >= target:
                break
        day += int(rng.integers(0, max_gap + 1))
    return out


def to_dates(days: list[int]) -> tuple[date, ...]:
    return tuple(date.fromordinal(int(d)) for d in days)
