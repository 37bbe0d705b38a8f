"""Windowed threshold tests, composite definitions, and referral decisions.

Windows look backward from an evaluation date and include it. Counts can only
rise on a stay date, so every test is evaluated at stay dates and the earliest
satisfying stay is the referral date.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass
from datetime import date
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .timeline import ClientTimeline, GapPolicy

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigurationError(ValueError):
    """A test or definition is internally inconsistent."""


class TestKind(str, Enum):
    STAY_COUNT = "stays"
    EPISODE_COUNT = "episodes"
    CONTINUOUS_EPISODE = "continuous"

    __test__ = False  # keep pytest from collecting this


class Label(str, Enum):
    CHRONIC = "Chronic"
    EPISODIC = "Episodic"
    BOTH = "Both"
    NONE = "None"


@dataclass(frozen=True)
class WindowTest:
    """``threshold`` or more stays/episodes inside a ``window_days`` window.

    ``CONTINUOUS_EPISODE`` ignores ``threshold`` semantics beyond 1 and fires
    once the running episode spans ``window_days`` days.
    """

    kind: TestKind
    window_days: int
    threshold: int = 1

    __test__ = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", TestKind(self.kind))
        if self.window_days < 1 or self.threshold < 1:
            raise ConfigurationError(
                f"window and threshold must be >= 1, got {self.window_days}/{self.threshold}"
            )
        if self.kind is TestKind.STAY_COUNT and self.threshold > self.window_days:
            raise ConfigurationError(
                f"stay threshold {self.threshold} exceeds window of {self.window_days} days"
            )

    @property
    def ident(self) -> str:
        if self.kind is TestKind.CONTINUOUS_EPISODE:
            return f"continuous>={self.window_days}d"
        return f"{self.window_days}/{self.threshold}"


@dataclass(frozen=True)
class Clause:
    test: WindowTest
    label: Label = Label.CHRONIC

    def __post_init__(self) -> None:
        object.__setattr__(self, "label", Label(self.label))
        if self.label in (Label.BOTH, Label.NONE):
            raise ConfigurationError(f"clause label must be Chronic or Episodic, got {self.label}")


@dataclass(frozen=True)
class DefinitionSpec:
    """OR-composite of clauses; the earliest satisfied clause wins."""

    name: str
    clauses: tuple[Clause, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "clauses", tuple(self.clauses))
        if not self.clauses:
            raise ConfigurationError(f"definition {self.name!r} has no clauses")


@dataclass(frozen=True)
class ReferralDecision:
    client_id: str
    referral_date: date | None = None
    satisfied_clause: int | None = None
    label: Label = Label.NONE

    @property
    def referred(self) -> bool:
        return self.referral_date is not None


def _first_true(mask: np.ndarray) -> int | None:
    idx = np.flatnonzero(mask)
    return int(idx[0]) if idx.size else None


def window_starts(days: np.ndarray, window_days: int) -> np.ndarray:
    """Index of the first stay inside the window ending at each stay."""
    return np.searchsorted(days, days - (window_days - 1), side="left")


def stays_in_windows(days: np.ndarray, window_days: int) -> np.ndarray:
    """Stay count of the backward window ending at each stay date."""
    return np.arange(len(days)) - window_starts(days, window_days) + 1


def episodes_in_windows(days: np.ndarray, window_days: int, gap_days: int) -> np.ndarray:
    """Episode count of the backward window ending at each stay date.

    The stays inside a window are segmented on their own; a pair (k, k+1) splits
    the window's stays iff both lie in the window and are ``gap_days`` or more apart.
    """
    lo = window_starts(days, window_days)
    breaks = np.concatenate(([0], np.cumsum(np.diff(days) >= gap_days)))
    return 1 + breaks - breaks[lo]


def episode_spans(days: np.ndarray, gap_days: int) -> np.ndarray:
    """Inclusive span of the running episode at each stay date."""
    new = np.concatenate(([True], np.diff(days) >= gap_days))
    start_idx = np.maximum.accumulate(np.where(new, np.arange(len(days)), 0))
    return days - days[start_idx] + 1


def referral_index(days: np.ndarray, test: WindowTest, gap_days: int) -> int | None:
    """Index of the earliest satisfying stay in an ordinal array, or ``None``."""
    if len(days) == 0:
        return None
    if test.kind is TestKind.STAY_COUNT:
        if len(days) < test.threshold:
            return None
        return _first_true(stays_in_windows(days, test.window_days) >= test.threshold)
    if test.kind is TestKind.EPISODE_COUNT:
        return _first_true(episodes_in_windows(days, test.window_days, gap_days) >= test.threshold)
    return _first_true(episode_spans(days, gap_days) >= test.window_days)


def eval_window_test(
    timeline: ClientTimeline, test: WindowTest, policy: GapPolicy | None = None
) -> date | None:
    """Earliest stay date at which ``test`` holds, or ``None`` if it never does."""
    policy = policy or GapPolicy()
    i = referral_index(timeline.days, test, policy.gap_days)
    return None if i is None else timeline.stay_dates[i]


def eval_definition(
    timeline: ClientTimeline, spec: DefinitionSpec, policy: GapPolicy | None = None
) -> ReferralDecision:
    """Evaluate every clause and keep the earliest; equal dates resolve to the lowest index."""
    policy = policy or GapPolicy()
    hits = [
        (i, referral_index(timeline.days, clause.test, policy.gap_days))
        for i, clause in enumerate(spec.clauses)
    ]
    hits = [(i, k) for i, k in hits if k is not None]
    if not hits:
        return ReferralDecision(timeline.client_id)
    best = min(k for _, k in hits)
    winners = [i for i, k in hits if k == best]
    labels = {spec.clauses[i].label for i in winners}
    label = labels.pop() if len(labels) == 1 else Label.BOTH
    return ReferralDecision(timeline.client_id, timeline.stay_dates[best], winners[0], label)


RAPID_CHRONIC = WindowTest(TestKind.STAY_COUNT, 90, 81)
RAPID_EPISODIC = WindowTest(TestKind.EPISODE_COUNT, 90, 2)


def builtin_definitions() -> dict[str, DefinitionSpec]:
    """Published definitions keyed by name."""
    specs = [
        DefinitionSpec("GoC", (
            Clause(WindowTest(TestKind.STAY_COUNT, 365, 180), Label.CHRONIC),
            Clause(WindowTest(TestKind.STAY_COUNT, 1095, 546), Label.CHRONIC),
        )),
        DefinitionSpec("GoA", (
            Clause(WindowTest(TestKind.CONTINUOUS_EPISODE, 365), Label.CHRONIC),
            Clause(WindowTest(TestKind.EPISODE_COUNT, 1095, 4), Label.EPISODIC),
        )),
        DefinitionSpec("RAPID", (
            Clause(RAPID_CHRONIC, Label.CHRONIC),
            Clause(RAPID_EPISODIC, Label.EPISODIC),
        )),
        DefinitionSpec("RAPID-Chronic", (Clause(RAPID_CHRONIC, Label.CHRONIC),)),
        DefinitionSpec("RAPID-Episodic", (Clause(RAPID_EPISODIC, Label.EPISODIC),)),
    ]
    return {s.name: s for s in specs}


def single_test_definition(test: WindowTest, label: Label | None = None) -> DefinitionSpec:
    if label is None:
        label = Label.CHRONIC if test.kind is TestKind.STAY_COUNT else Label.EPISODIC
    return DefinitionSpec(f"{test.kind.value}:{test.ident}", (Clause(test, label),))


def parse_definitions(text: str) -> dict[str, DefinitionSpec]:
    """Read custom definitions from TOML text.

    Each ``[[definition]]`` table carries a ``name`` and a ``clauses`` array of
    inline tables with ``kind`` (stays | episodes | continuous), ``window``,
    optional ``threshold`` and optional ``label`` (Chronic | Episodic).
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"cannot parse definitions: {exc}") from exc
    out: dict[str, DefinitionSpec] = {}
    for entry in doc.get("definition", []):
        try:
            name = str(entry["name"])
            clauses = []
            for c in entry["clauses"]:
                test = WindowTest(TestKind(c["kind"]), int(c["window"]), int(c.get("threshold", 1)))
                default = Label.CHRONIC if test.kind is not TestKind.EPISODE_COUNT else Label.EPISODIC
                clauses.append(Clause(test, Label(c.get("label", default))))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"bad definition entry {entry!r}: {exc}") from exc
        out[name] = DefinitionSpec(name, tuple(clauses))
    if not out:
        raise ConfigurationError("no [[definition]] tables found")
    return out


def load_definitions(path: str | os.PathLike) -> dict[str, DefinitionSpec]:
    with open(path, encoding="utf-8") as fh:
        return parse_definitions(fh.read())


def resolve_definition(
    name: str, extra: Mapping[str, DefinitionSpec] | None = None
) -> DefinitionSpec:
    table = {**builtin_definitions(), **(extra or {})}
    try:
        return table[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown definition {name!r}; known: {', '.join(sorted(table))}"
        ) from None


def as_timelines(X: Mapping[str, ClientTimeline] | Iterable[ClientTimeline]) -> list[ClientTimeline]:
    """Validate a population argument and return timelines in client-id order."""
    items = list(X.values()) if isinstance(X, Mapping) else list(X)
    for tl in items:
        if not isinstance(tl, ClientTimeline):
            raise TypeError(f"expected ClientTimeline, got {type(tl).__name__}")
    ids = [tl.client_id for tl in items]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate client ids in population")
    return sorted(items, key=lambda tl: tl.client_id)


class ReferralDetector(BaseEstimator):
    """Estimator wrapper that flags clients under a named or explicit definition.

    Parameters
    ----------
    definition : str or DefinitionSpec, default="RAPID"
        Built-in name (GoC, GoA, RAPID, RAPID-Chronic, RAPID-Episodic) or a spec.
    gap_days : int, default=30
        Episode separation used by episode-based clauses.
    """

    def __init__(self, definition: str | DefinitionSpec = "RAPID", gap_days: int = 30):
        self.definition = definition
        self.gap_days = gap_days

    def fit(self, X=None, y=None):
        if isinstance(self.definition, DefinitionSpec):
            self.definition_ = self.definition
        else:
            self.definition_ = resolve_definition(self.definition)
        self.policy_ = GapPolicy(self.gap_days)
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "definition_"):
            self.fit()

    def decide(self, X) -> list[ReferralDecision]:
        self._check_fitted()
        return [eval_definition(tl, self.definition_, self.policy_) for tl in as_timelines(X)]

    def predict(self, X) -> np.ndarray:
        """Label per client (client-id order): Chronic, Episodic, Both or None."""
        return np.array([d.label.value for d in self.decide(X)], dtype=object)

    def fit_predict(self, X, y=None) -> np.ndarray:
        return self.fit(X).predict(X)

    def referral_dates(self, X) -> dict[str, date | None]:
        return {d.client_id: d.referral_date for d in self.decide(X)}


def referral_dates(
    timelines: Sequence[ClientTimeline], test: WindowTest, policy: GapPolicy | None = None
) -> dict[str, date | None]:
    policy = policy or GapPolicy()
    return {tl.client_id: eval_window_test(tl, test, policy) for tl in timelines}
