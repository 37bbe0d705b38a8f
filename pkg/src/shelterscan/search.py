"""Exhaustive window/threshold grids ranked by referral impact."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .detect import ConfigurationError, TestKind, WindowTest, as_timelines, referral_index
from .impact import ReferralOutcome, aggregate_impact
from .timeline import ClientTimeline, GapPolicy

DEFAULT_WINDOWS = (30, 90, 180, 365, 547)
DEFAULT_FRACTIONS = (0.5, 0.75, 0.9)
DEFAULT_COUNTS = (2, 3, 4, 5)


class Objective(str, Enum):
    AVG_STAYS_SAVED = "stays"
    AVG_TENURE_REDUCTION = "tenure"


@dataclass(frozen=True)
class GridSpec:
    """Windows crossed with thresholds.

    For ``STAY_COUNT`` the thresholds are fractions of the window; for
    ``EPISODE_COUNT`` they are absolute episode counts.
    """

    kind: TestKind
    windows: tuple[int, ...] = DEFAULT_WINDOWS
    thresholds: tuple[float, ...] = DEFAULT_FRACTIONS
    objective: Objective | None = None

    def __post_init__(self) -> None:
        kind = TestKind(self.kind)
        if kind is TestKind.CONTINUOUS_EPISODE:
            raise ConfigurationError("grids support stay and episode counts only")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "windows", tuple(int(w) for w in self.windows))
        object.__setattr__(self, "thresholds", tuple(self.thresholds))
        if not self.windows or not self.thresholds:
            raise ConfigurationError("windows and thresholds must be nonempty")
        if any(w < 1 for w in self.windows):
            raise ConfigurationError("windows must be positive")
        if kind is TestKind.STAY_COUNT:
            if any(not 0.0 < f <= 1.0 for f in self.thresholds):
                raise ConfigurationError("stay fractions must lie in (0, 1]")
        elif any(int(t) != t or t < 1 for t in self.thresholds):
            raise ConfigurationError("episode thresholds must be positive integers")
        if self.objective is None:
            default = (Objective.AVG_STAYS_SAVED if kind is TestKind.STAY_COUNT
                       else Objective.AVG_TENURE_REDUCTION)
            object.__setattr__(self, "objective", default)
        else:
            object.__setattr__(self, "objective", Objective(self.objective))

    @classmethod
    def chronic(cls, **kw) -> "GridSpec":
        kw.setdefault("thresholds", DEFAULT_FRACTIONS)
        return cls(TestKind.STAY_COUNT, **kw)

    @classmethod
    def episodic(cls, **kw) -> "GridSpec":
        kw.setdefault("thresholds", DEFAULT_COUNTS)
        return cls(TestKind.EPISODE_COUNT, **kw)


def expand_grid(spec: GridSpec) -> list[WindowTest]:
    """Window-major cartesian product; stay fractions are floored to whole stays."""
    tests = []
    for w in spec.windows:
        for t in spec.thresholds:
            if spec.kind is TestKind.STAY_COUNT:
                # round first so 0.9 * 90 = 80.99999... still floors to 81
                threshold = math.floor(round(w * t, 9))
                if threshold < 1:
                    raise ConfigurationError(f"window {w} x fraction {t} floors to 0 stays")
            else:
                threshold = int(t)
            tests.append(WindowTest(spec.kind, w, threshold))
    return tests


@dataclass(frozen=True)
class GridRow:
    window_days: int
    threshold: int
    identified: int
    population: int
    objective: float | None
    median_time_to_id: float | None
    mean_stays_saved: float | None = field(default=None, compare=False)
    mean_tenure_reduction: float | None = field(default=None, compare=False)

    @property
    def coverage(self) -> float:
        return self.identified / self.population if self.population else 0.0

    @property
    def ident(self) -> str:
        return f"{self.window_days}/{self.threshold}"


def _sort_key(row: GridRow):
    missing = row.objective is None
    return (missing, -(row.objective or 0.0), row.window_days, row.threshold)


def outcomes_for_test(
    timelines: Sequence[ClientTimeline], test: WindowTest, policy: GapPolicy
) -> list[ReferralOutcome]:
    out = []
    for tl in timelines:
        i = referral_index(tl.days, test, policy.gap_days)
        if i is None:
            continue
        days = tl.days
        out.append(ReferralOutcome(
            client_id=tl.client_id,
            referral_date=tl.stay_dates[i],
            stays_saved=len(days) - i - 1,
            tenure_reduction_days=int(days[-1] - days[i]),
            time_to_id_days=int(days[i] - days[0]),
        ))
    return out


def run_grid(
    timelines: Mapping[str, ClientTimeline] | Iterable[ClientTimeline],
    spec: GridSpec,
    policy: GapPolicy | None = None,
    top: int | None = None,
) -> list[GridRow]:
    """One row per grid cell, best objective first.

    Cells nobody satisfies carry ``objective=None`` and sink to the bottom; ties
    go to the smaller window, then the smaller threshold.
    """
    policy = policy or GapPolicy()
    population = as_timelines(timelines)
    if not population:
        raise ValueError("population is empty")
    rows = []
    for test in expand_grid(spec):
        summary = aggregate_impact(outcomes_for_test(population, test, policy), len(population))
        value = (summary.mean_stays_saved if spec.objective is Objective.AVG_STAYS_SAVED
                 else summary.mean_tenure_reduction)
        rows.append(GridRow(
            test.window_days, test.threshold, summary.identified, summary.population,
            value, summary.median_time_to_id,
            summary.mean_stays_saved, summary.mean_tenure_reduction,
        ))
    rows.sort(key=_sort_key)
    if top is not None:
        if top < 1:
            raise ValueError("top must be >= 1")
        rows = rows[:top]
    return rows
