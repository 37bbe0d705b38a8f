"""Seeded synthetic shelter populations built from archetype specs.

Spec files are TOML::

    gap_days = 30
    start = "2009-07-02"
    end = "2017-12-31"

    [[archetype]]
    name = "Transitional"
    fraction = 0.852
    episodes = [1, 3]
    stays_per_episode = [1, 29]
    gap = [30, 1500]
    spacing = [1, 10]

Every ``[lo, hi]`` pair is an inclusive integer range sampled uniformly.
``gap`` is the distance from one episode's last stay to the next episode's first
and must be at least ``gap_days``; ``spacing`` separates stays inside an episode
and must stay below ``gap_days``.
"""

from __future__ import annotations

import csv
import io
import os
import sys
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta
from typing import IO, Sequence

import numpy as np

from .detect import ConfigurationError
from .ingest import RawEvent
from .timeline import DEFAULT_GAP_DAYS

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

IntRange = tuple[int, int]

DEFAULT_START = date(2009, 7, 2)
DEFAULT_END = date(2017, 12, 31)
NIGHT = time(22, 0)
MORNING = time(8, 30)


@dataclass(frozen=True)
class ArchetypeSpec:
    name: str
    fraction: float
    episodes: IntRange
    stays_per_episode: IntRange
    gap: IntRange
    spacing: IntRange

    def validate(self, gap_days: int) -> None:
        for field_name in ("episodes", "stays_per_episode", "gap", "spacing"):
            lo, hi = getattr(self, field_name)
            if lo > hi or lo < 1:
                raise ConfigurationError(f"{self.name}: bad {field_name} range [{lo}, {hi}]")
        if not 0.0 <= self.fraction <= 1.0:
            raise ConfigurationError(f"{self.name}: fraction {self.fraction} outside [0, 1]")
        if self.spacing[1] >= gap_days:
            raise ConfigurationError(
                f"{self.name}: within-episode spacing up to {self.spacing[1]} would split "
                f"episodes at gap_days={gap_days}"
            )
        if self.gap[0] < gap_days:
            raise ConfigurationError(
                f"{self.name}: inter-episode gap from {self.gap[0]} would merge episodes "
                f"at gap_days={gap_days}"
            )

    @property
    def mean_episodes(self) -> float:
        return sum(self.episodes) / 2

    @property
    def mean_stays(self) -> float:
        return self.mean_episodes * sum(self.stays_per_episode) / 2


# Uniform ranges chosen so mean episodes/stays land near the published cluster
# averages: Transitional 1.8/30.3, Episodic 9.2/167.0, Chronic 3.7/1273.1.
DEFAULT_ARCHETYPES: tuple[ArchetypeSpec, ...] = (
    ArchetypeSpec("Transitional", 0.852, (1, 3), (1, 29), (30, 1500), (1, 12)),
    ArchetypeSpec("Episodic", 0.119, (5, 13), (1, 36), (30, 150), (1, 6)),
    ArchetypeSpec("Chronic", 0.029, (2, 5), (210, 518), (30, 180), (1, 1)),
)


@dataclass(frozen=True)
class SynthConfig:
    archetypes: tuple[ArchetypeSpec, ...] = DEFAULT_ARCHETYPES
    gap_days: int = DEFAULT_GAP_DAYS
    start: date = DEFAULT_START
    end: date = DEFAULT_END

    def validate(self) -> None:
        if not self.archetypes:
            raise ConfigurationError("at least one archetype is required")
        total = sum(a.fraction for a in self.archetypes)
        if abs(total - 1.0) > 1e-9:
            raise ConfigurationError(f"archetype fractions sum to {total}, not 1")
        if self.start > self.end:
            raise ConfigurationError("start date after end date")
        for a in self.archetypes:
            a.validate(self.gap_days)


def parse_spec(text: str) -> SynthConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"cannot parse synth spec: {exc}") from exc
    try:
        archetypes = tuple(
            ArchetypeSpec(
                str(a["name"]), float(a["fraction"]),
                *(tuple(int(v) for v in a[key])
                  for key in ("episodes", "stays_per_episode", "gap", "spacing")),
            )
            for a in doc.get("archetype", [])
        )
        cfg = SynthConfig(
            archetypes or DEFAULT_ARCHETYPES,
            int(doc.get("gap_days", DEFAULT_GAP_DAYS)),
            date.fromisoformat(str(doc.get("start", DEFAULT_START))),
            date.fromisoformat(str(doc.get("end", DEFAULT_END))),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"bad synth spec: {exc}") from exc
    cfg.validate()
    return cfg


def load_spec(path: str | os.PathLike) -> SynthConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read())


def archetype_counts(fractions: Sequence[float], size: int) -> list[int]:
    """Largest-remainder apportionment of ``size`` clients."""
    raw = np.asarray(fractions, dtype=float) * size
    counts = np.floor(raw).astype(int)
    short = size - counts.sum()
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:short]] += 1
    return counts.tolist()


@dataclass(frozen=True)
class SyntheticClient:
    client_id: str
    archetype: str
    stay_days: tuple[date, ...]
    n_episodes: int


def _draw(rng: np.random.Generator, r: IntRange) -> int:
    return int(rng.integers(r[0], r[1] + 1))


def generate_client(
    client_id: str, spec: ArchetypeSpec, cfg: SynthConfig, rng: np.random.Generator
) -> SyntheticClient:
    day = cfg.start + timedelta(days=_draw(rng, (0, (cfg.end - cfg.start).days)))
    n_episodes = _draw(rng, spec.episodes)
    stays = []
    for e in range(n_episodes):
        if e:
            day += timedelta(days=_draw(rng, spec.gap))
        for s in range(_draw(rng, spec.stays_per_episode)):
            if s:
                day += timedelta(days=_draw(rng, spec.spacing))
            stays.append(day)
    return SyntheticClient(client_id, spec.name, tuple(stays), n_episodes)


def generate_clients(size: int, seed: int = 0, cfg: SynthConfig | None = None) -> list[SyntheticClient]:
    """Clients in id order; client ``i`` draws from its own ``(seed, i)`` stream."""
    cfg = cfg or SynthConfig()
    cfg.validate()
    if size < 0:
        raise ValueError("size must be >= 0")
    width = max(6, len(str(size)))
    assignment = [
        spec
        for spec, n in zip(cfg.archetypes, archetype_counts([a.fraction for a in cfg.archetypes], size))
        for _ in range(n)
    ]
    # shuffle archetypes over ids so id order carries no structure
    order = np.random.default_rng([seed, size]).permutation(size)
    clients = []
    for i in range(size):
        rng = np.random.default_rng([seed, i])
        clients.append(generate_client(f"c{i:0{width}d}", assignment[order[i]], cfg, rng))
    return clients


def client_events(client: SyntheticClient, rng: np.random.Generator) -> list[RawEvent]:
    """Night-sleep entry per stay, plus an occasional same-day day-sleep entry."""
    events = []
    for d in client.stay_days:
        if rng.random() < 0.2:
            events.append(RawEvent(client.client_id, datetime.combine(d, MORNING), "day-sleep"))
        events.append(RawEvent(client.client_id, datetime.combine(d, NIGHT), "night-sleep"))
    return events


def generate_population(
    size: int, seed: int = 0, cfg: SynthConfig | None = None
) -> tuple[list[RawEvent], list[SyntheticClient]]:
    """Events (client-major, chronological) and the ground-truth clients behind them."""
    clients = generate_clients(size, seed, cfg)
    events = []
    for i, client in enumerate(clients):
        events.extend(client_events(client, np.random.default_rng([seed, i, 1])))
    return events, clients


def write_events(events: Sequence[RawEvent], out: IO[str] | str | os.PathLike) -> None:
    if isinstance(out, (str, os.PathLike)):
        with open(out, "w", encoding="utf-8", newline="") as fh:
            write_events(events, fh)
        return
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["client_id", "timestamp", "service"])
    for ev in events:
        writer.writerow([ev.client_id, ev.timestamp.isoformat(timespec="minutes"), ev.service or ""])


def events_to_csv(events: Sequence[RawEvent]) -> str:
    buf = io.StringIO()
    write_events(events, buf)
    return buf.getvalue()
