"""Timestamp parsing and hour/day bucketing.

All record timestamps are held internally as UTC epoch seconds. Hour-of-day
and calendar-day bucketing go through a configurable timezone (default
America/New_York) because daily rhythms are local-time phenomena.
"""

from __future__ import annotations

from datetime import date, datetime, timedelta, timezone
from zoneinfo import ZoneInfo

UTC = timezone.utc


def parse_timestamp(text: str) -> int:
    """Parse an ISO-8601 timestamp to UTC epoch seconds.

    Naive timestamps are taken as UTC; offsets (including a trailing 'Z')
    are honoured.
    """
    cleaned = text.strip()
    if cleaned.endswith(("Z", "z")):
        cleaned = cleaned[:-1] + "+00:00"
    dt = datetime.fromisoformat(cleaned)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=UTC)
    return int(dt.timestamp())


def parse_date(text: str) -> date:
    return date.fromisoformat(text.strip())


def format_timestamp(epoch: int) -> str:
    """Inverse of :func:`parse_timestamp` at second resolution (UTC, no offset)."""
    return datetime.fromtimestamp(epoch, UTC).strftime("%Y-%m-%dT%H:%M:%S")


def floor_hour(epoch: int) -> int:
    return epoch - epoch % 3600


def hour_index(epoch: int, t0: int) -> int:
    """Index of the hour bucket containing ``epoch``, counted from ``t0``."""
    return (epoch - t0) // 3600


def get_zone(name: str) -> ZoneInfo:
    return ZoneInfo(name)


def hour_of_day(epoch: int, tz: ZoneInfo) -> int:
    """Local clock hour (0-23) of an instant."""
    return datetime.fromtimestamp(epoch, tz).hour


def local_date(epoch: int, tz: ZoneInfo) -> date:
    """Local calendar day of an instant."""
    return datetime.fromtimestamp(epoch, tz).date()


def day_span(day: date, tz: ZoneInfo) -> tuple[int, int]:
    """[start, end) epoch seconds of a local calendar day (DST-aware)."""
    start = datetime(day.year, day.month, day.day, tzinfo=tz)
    end = start + timedelta(days=1)
    return int(start.timestamp()), int(end.timestamp())
