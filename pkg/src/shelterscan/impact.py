"""Referral impact metrics, cohort summaries, referral load and the under-the-radar cohort."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from typing import Iterable, Mapping, Sequence

import numpy as np

from .timeline import (
    ClientTimeline,
    GapPolicy,
    count_episodes,
    inter_episode_gaps,
    segment_episodes,
    tenure,
    usage_percentage,
)

DAYS_PER_MONTH = 30.44
PERCENTILE_METHODS = {"linear": "linear", "nearest": "inverted_cdf"}
COHORT_METRICS = ("Total Stays", "Total Episodes", "Tenure (days)", "Usage Percentage")


class ContractViolation(ValueError):
    """A documented precondition was not met."""


@dataclass(frozen=True)
class ReferralOutcome:
    client_id: str
    referral_date: date
    stays_saved: int
    tenure_reduction_days: int
    time_to_id_days: int


def referral_impact(timeline: ClientTimeline, referral_date: date) -> ReferralOutcome:
    """Stays and tenure eliminated by a perfect referral on ``referral_date``."""
    dates = timeline.stay_dates
    try:
        idx = dates.index(referral_date)
    except ValueError:
        raise ContractViolation(
            f"referral date {referral_date} is not a stay of {timeline.client_id!r}"
        ) from None
    return ReferralOutcome(
        client_id=timeline.client_id,
        referral_date=referral_date,
        stays_saved=len(dates) - idx - 1,
        tenure_reduction_days=(timeline.last - referral_date).days,
        time_to_id_days=(referral_date - timeline.first).days,
    )


def percentile(values: Sequence[float], q: float, method: str = "linear") -> float:
    """``q`` in [0, 1]. ``linear`` interpolates at rank 1 + q(n-1); ``nearest`` is nearest-rank."""
    try:
        np_method = PERCENTILE_METHODS[method]
    except KeyError:
        raise ValueError(f"unknown percentile method {method!r}") from None
    return float(np.percentile(np.asarray(values, dtype=float), 100.0 * q, method=np_method))


def median(values: Sequence[float]) -> float:
    # even-length samples average the middle pair
    return float(np.median(np.asarray(values, dtype=float)))


@dataclass(frozen=True)
class ImpactSummary:
    identified: int
    population: int
    mean_stays_saved: float | None
    mean_tenure_reduction: float | None
    mean_time_to_id: float | None
    median_time_to_id: float | None

    @property
    def coverage(self) -> float:
        return self.identified / self.population if self.population else 0.0


def aggregate_impact(outcomes: Iterable[ReferralOutcome], population_size: int) -> ImpactSummary:
    outcomes = sorted(outcomes, key=lambda o: o.client_id)
    if population_size < len(outcomes):
        raise ContractViolation("population smaller than number of referrals")
    if not outcomes:
        return ImpactSummary(0, population_size, None, None, None, None)
    saved = [o.stays_saved for o in outcomes]
    reduction = [o.tenure_reduction_days for o in outcomes]
    tti = [o.time_to_id_days for o in outcomes]
    return ImpactSummary(
        identified=len(outcomes),
        population=population_size,
        mean_stays_saved=float(np.mean(saved)),
        mean_tenure_reduction=float(np.mean(reduction)),
        mean_time_to_id=float(np.mean(tti)),
        median_time_to_id=median(tti),
    )


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    median: float
    p90: float


@dataclass(frozen=True)
class CohortStats:
    metrics: dict[str, MetricSummary]
    coverage_count: int
    population: int

    @property
    def coverage(self) -> float:
        return self.coverage_count / self.population if self.population else 0.0

    @property
    def empty(self) -> bool:
        return self.coverage_count == 0


def client_metrics(timeline: ClientTimeline, policy: GapPolicy) -> tuple[int, int, int, float]:
    return (
        timeline.n_stays,
        count_episodes(timeline, policy),
        tenure(timeline),
        usage_percentage(timeline),
    )


def cohort_stats(
    timelines: Iterable[ClientTimeline],
    population_size: int,
    policy: GapPolicy | None = None,
    percentile_method: str = "linear",
) -> CohortStats:
    """Mean, median and 90th percentile of stays, episodes, tenure and usage.

    An empty cohort yields ``metrics == {}`` and zero coverage.
    """
    policy = policy or GapPolicy()
    cohort = sorted(timelines, key=lambda tl: tl.client_id)
    if not cohort:
        return CohortStats({}, 0, population_size)
    table = np.array([client_metrics(tl, policy) for tl in cohort], dtype=float)
    metrics = {
        name: MetricSummary(
            float(col.mean()), median(col), percentile(col, 0.9, percentile_method)
        )
        for name, col in zip(COHORT_METRICS, table.T)
    }
    return CohortStats(metrics, len(cohort), population_size)


def referrals_per_month(
    referral_dates: Iterable[date], span_days: float | None = None
) -> float:
    """Referral count per 30.44-day month.

    The span defaults to first-to-last referral date.
    """
    dates = sorted(referral_dates)
    if not dates:
        return 0.0
    if span_days is None:
        span_days = (dates[-1] - dates[0]).days
    if span_days <= 0:
        raise ContractViolation("observation span must be positive")
    return len(dates) / (span_days / DAYS_PER_MONTH)


@dataclass(frozen=True)
class UnderRadarReport:
    unflagged: CohortStats
    tenure_cutoff: float | None
    long_tenure_count: int
    population: int
    mean_inter_episode_gap: float | None

    @property
    def long_tenure_fraction(self) -> float:
        return self.long_tenure_count / self.population if self.population else 0.0


def under_radar_report(
    timelines: Mapping[str, ClientTimeline] | Iterable[ClientTimeline],
    flagged: Iterable[str],
    policy: GapPolicy | None = None,
    percentile_method: str = "linear",
) -> UnderRadarReport:
    """Profile clients no definition flagged, then the slice at or above their p90 tenure.

    The reported gap is the mean over every inter-episode gap pooled across that slice.
    """
    policy = policy or GapPolicy()
    population = list(timelines.values()) if isinstance(timelines, Mapping) else list(timelines)
    flagged = set(flagged)
    unknown = flagged - {tl.client_id for tl in population}
    if unknown:
        raise ContractViolation(f"flagged clients not in population: {sorted(unknown)[:5]}")
    rest = sorted((tl for tl in population if tl.client_id not in flagged), key=lambda tl: tl.client_id)
    stats = cohort_stats(rest, len(population), policy, percentile_method)
    if stats.empty:
        return UnderRadarReport(stats, None, 0, len(population), None)
    cutoff = stats.metrics["Tenure (days)"].p90
    slice_ = [tl for tl in rest if tenure(tl) >= cutoff]
    gaps = [g for tl in slice_ for g in inter_episode_gaps(segment_episodes(tl, policy))]
    mean_gap = float(np.mean(gaps)) if gaps else None
    return UnderRadarReport(stats, cutoff, len(slice_), len(population), mean_gap)
