"""Raw access records to per-client daily stays, plus the censoring inclusion filter."""

from __future__ import annotations

import csv
import io
import logging
import os
import re
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime, tzinfo
from typing import IO, Iterable, Mapping

from .timeline import ClientTimeline

logger = logging.getLogger(__name__)

SERVICES = frozenset({"day-sleep", "night-sleep", "other"})
DEFAULT_MAX_BAD_FRACTION = 0.10
DEFAULT_CENSOR_START = date(2009, 7, 1)
DEFAULT_CENSOR_END = date(2018, 1, 20)

# A header cell is a bare column name; anything else in the timestamp slot is a bad row.
_HEADER_CELL = re.compile(r"^[A-Za-z_][A-Za-z0-9_ ]*$")


class FormatError(ValueError):
    """Input has too many malformed lines to be trusted."""


@dataclass(frozen=True)
class RawEvent:
    client_id: str
    timestamp: datetime
    service: str | None = None

    def __post_init__(self) -> None:
        if not self.client_id:
            raise ValueError("client_id must be non-empty")
        if self.service is not None and self.service not in SERVICES:
            raise ValueError(f"unknown service tag {self.service!r}")

    @property
    def day(self) -> date:
        return self.timestamp.date()


@dataclass(frozen=True)
class CensorBounds:
    """Exclusive bounds on a client's first stay date."""

    earliest_first_stay: date = DEFAULT_CENSOR_START
    latest_first_stay: date = DEFAULT_CENSOR_END

    def __post_init__(self) -> None:
        if not self.earliest_first_stay < self.latest_first_stay:
            raise ValueError(
                f"censor start {self.earliest_first_stay} must precede end {self.latest_first_stay}"
            )

    def admits(self, first_stay: date) -> bool:
        return self.earliest_first_stay < first_stay < self.latest_first_stay


@dataclass
class ParseResult:
    events: list[RawEvent]
    n_records: int
    bad_lines: list[tuple[int, str]] = field(default_factory=list)
    had_header: bool = False

    @property
    def n_bad(self) -> int:
        return len(self.bad_lines)


@dataclass
class CensorResult:
    timelines: dict[str, ClientTimeline]
    n_input: int

    @property
    def retained(self) -> int:
        return len(self.timelines)

    @property
    def retained_fraction(self) -> float:
        return self.retained / self.n_input if self.n_input else 0.0


def parse_timestamp(text: str, tz: tzinfo | None = None) -> datetime:
    """ISO 8601 date or date-time. Aware values are shifted to ``tz`` when given."""
    text = text.strip()
    if not text:
        raise ValueError("empty timestamp")
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is not None and tz is not None:
        ts = ts.astimezone(tz)
    return ts.replace(tzinfo=None)


def _is_header(row: list[str]) -> bool:
    if len(row) < 2:
        return False
    try:
        parse_timestamp(row[1])
    except ValueError:
        return bool(_HEADER_CELL.match(row[1].strip()))
    return False


def _parse_row(row: list[str], tz: tzinfo | None) -> RawEvent:
    if len(row) not in (2, 3):
        raise ValueError(f"expected 2 or 3 fields, got {len(row)}")
    client_id = row[0].strip()
    service = row[2].strip() if len(row) == 3 and row[2].strip() else None
    return RawEvent(client_id, parse_timestamp(row[1], tz), service)


def _open_text(source: str | os.PathLike | IO) -> tuple[IO[str], bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, encoding="utf-8", newline=""), True
    if isinstance(source, (io.RawIOBase, io.BufferedIOBase)) or "b" in getattr(source, "mode", ""):
        return io.TextIOWrapper(source, encoding="utf-8", newline=""), False
    return source, False


def parse_events(
    source: str | os.PathLike | IO,
    *,
    max_bad_fraction: float = DEFAULT_MAX_BAD_FRACTION,
    tz: tzinfo | None = None,
) -> ParseResult:
    """Read ``client_id,timestamp[,service]`` records.

    Malformed lines are collected on the result rather than dropped silently. If
    their share of data lines exceeds ``max_bad_fraction`` a :class:`FormatError`
    naming the first offender is raised.
    """
    if not 0.0 <= max_bad_fraction <= 1.0:
        raise ValueError("max_bad_fraction must lie in [0, 1]")
    stream, owned = _open_text(source)
    try:
        reader = csv.reader(stream)
        events: list[RawEvent] = []
        bad: list[tuple[int, str]] = []
        n_records = 0
        had_header = False
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if lineno == 1 and _is_header(row):
                had_header = True
                continue
            n_records += 1
            try:
                events.append(_parse_row(row, tz))
            except ValueError:
                bad.append((lineno, ",".join(row)))
    finally:
        if owned:
            stream.close()

    result = ParseResult(events, n_records, bad, had_header)
    if bad:
        logger.warning("%d malformed line(s) of %d; first at line %d", len(bad), n_records, bad[0][0])
        if len(bad) / n_records > max_bad_fraction:
            lineno, text = bad[0]
            raise FormatError(
                f"{len(bad)}/{n_records} malformed lines exceeds limit {max_bad_fraction:.0%}; "
                f"first bad line {lineno}: {text!r}"
            )
    return result


def collapse_to_stays(events: Iterable[RawEvent]) -> dict[str, ClientTimeline]:
    """One stay per client per calendar date, keyed by client id in sorted order."""
    days: dict[str, set[date]] = defaultdict(set)
    for event in events:
        days[event.client_id].add(event.day)
    return {cid: ClientTimeline.from_dates(cid, days[cid]) for cid in sorted(days)}


def merge_timelines(*shards: Mapping[str, ClientTimeline]) -> dict[str, ClientTimeline]:
    """Union per-client date sets from independently collapsed shards."""
    days: dict[str, set[date]] = defaultdict(set)
    for shard in shards:
        for cid, tl in shard.items():
            days[cid].update(tl.stay_dates)
    return {cid: ClientTimeline.from_dates(cid, days[cid]) for cid in sorted(days)}


def apply_censoring_filter(
    timelines: Mapping[str, ClientTimeline], bounds: CensorBounds | None = None
) -> CensorResult:
    """Keep clients whose first stay falls strictly inside ``bounds``."""
    bounds = bounds or CensorBounds()
    kept = {cid: tl for cid, tl in timelines.items() if bounds.admits(tl.first)}
    return CensorResult(kept, len(timelines))


def load_timelines(
    source: str | os.PathLike | IO,
    *,
    bounds: CensorBounds | None = None,
    max_bad_fraction: float = DEFAULT_MAX_BAD_FRACTION,
    censor: bool = True,
) -> tuple[ParseResult, CensorResult]:
    """Parse, collapse and (optionally) censor in one call."""
    parsed = parse_events(source, max_bad_fraction=max_bad_fraction)
    timelines = collapse_to_stays(parsed.events)
    if censor:
        return parsed, apply_censoring_filter(timelines, bounds)
    return parsed, CensorResult(timelines, len(timelines))
