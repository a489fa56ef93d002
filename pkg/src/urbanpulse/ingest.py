"""Line-oriented CSV parsers for the five input datasets.

Every parser consumes a text stream (or any iterable of lines) and returns
``(records, line_errors)``. Malformed lines never abort a parse: each one
becomes a :class:`LineError` carrying its 1-based line number and a reason,
so that ``input lines == records + errors + 1 header`` always holds.
Municipal data is dirty; skipping with diagnostics beats crashing.

The matching ``write_*`` helpers emit the exact same formats, and a parse
of what they wrote reproduces the records bit for bit (timestamps are
second-resolution UTC, floats use shortest round-trip repr).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date
from typing import Iterable, TextIO

from .errors import FormatError
from .geogrid import GeoPoint
from .timebase import format_timestamp, parse_date, parse_timestamp

# The 10 first-level venue categories, alphabetical. Incoming labels are
# matched case-insensitively after trimming.
POI_CATEGORIES = (
    "arts & entertainment",
    "college & education",
    "event",
    "food",
    "nightlife",
    "outdoors & recreation",
    "professional",
    "residence",
    "shops",
    "travel",
)

# Daily weather attributes retained from the station feed: highest 2-minute
# wind speed, highest 5-second wind speed (m/s), precipitation and snow (mm).
WEATHER_ATTRIBUTES = ("WSF2", "WSF5", "PRCP", "SNOW")

TRIPS_HEADER = ["pickup_datetime", "dropoff_datetime", "pickup_lat", "pickup_lon", "dropoff_lat", "dropoff_lon"]
POIS_HEADER = ["id", "name", "category", "lat", "lon", "checkins"]
TWEETS_HEADER = ["timestamp", "user_id", "lat", "lon", "text"]
WEATHER_HEADER = ["date", "WSF2", "WSF5", "PRCP", "SNOW"]
COLLISIONS_HEADER = ["datetime", "lat", "lon", "injured", "killed"]


@dataclass(frozen=True, slots=True)
class LineError:
    line_no: int
    reason: str


@dataclass(frozen=True, slots=True)
class TripRecord:
    pickup_time: int
    dropoff_time: int
    pickup: GeoPoint
    dropoff: GeoPoint


@dataclass(frozen=True, slots=True)
class PoiRecord:
    id: str
    name: str
    category: str
    location: GeoPoint
    popularity_z: int


@dataclass(frozen=True, slots=True)
class TweetRecord:
    time: int
    user_id: str
    location: GeoPoint
    text: str


@dataclass(slots=True)
class WeatherDay:
    date: date
    values: dict[str, float | None]


@dataclass(frozen=True, slots=True)
class CollisionRecord:
    time: int
    location: GeoPoint
    severity_s: int


def _rows(source: Iterable[str] | TextIO, expected_header: list[str], name: str):
    """Yield (line_no, row) pairs after validating the header row."""
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError(f"{name}: empty input, missing header") from None
    if [h.strip() for h in header] != expected_header:
        raise FormatError(f"{name}: bad header {header!r}, expected {expected_header!r}")
    for row in reader:
        yield reader.line_num, row


def _geopoint(lat_text: str, lon_text: str) -> GeoPoint:
    try:
        lat = float(lat_text)
        lon = float(lon_text)
    except ValueError:
        raise ValueError("unparseable coordinate") from None
    return GeoPoint(lat, lon)  # raises "lat out of range" etc.


def _nonneg_int(text: str, what: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ValueError(f"non-integer {what}") from None
    if value < 0:
        raise ValueError(f"negative {what}")
    return value


def parse_trips(source: Iterable[str] | TextIO) -> tuple[list[TripRecord], list[LineError]]:
    """Parse taxi trips: pickup/dropoff instants and endpoints."""
    records: list[TripRecord] = []
    errors: list[LineError] = []
    for line_no, row in _rows(source, TRIPS_HEADER, "trips"):
        if len(row) != 6:
            errors.append(LineError(line_no, f"expected 6 fields, got {len(row)}"))
            continue
        try:
            pickup_time = parse_timestamp(row[0])
            dropoff_time = parse_timestamp(row[1])
        except ValueError:
            errors.append(LineError(line_no, "bad timestamp"))
            continue
        try:
            pickup = _geopoint(row[2], row[3])
            dropoff = _geopoint(row[4], row[5])
        except ValueError as exc:
            errors.append(LineError(line_no, str(exc)))
            continue
        if dropoff_time < pickup_time:
            errors.append(LineError(line_no, "negative duration"))
            continue
        records.append(TripRecord(pickup_time, dropoff_time, pickup, dropoff))
    return records, errors


def parse_pois(source: Iterable[str] | TextIO) -> tuple[list[PoiRecord], list[LineError]]:
    """Parse venues: id, name, one of the 10 categories, location, check-in total."""
    records: list[PoiRecord] = []
    errors: list[LineError] = []
    known = set(POI_CATEGORIES)
    for line_no, row in _rows(source, POIS_HEADER, "pois"):
        if len(row) != 6:
            errors.append(LineError(line_no, f"expected 6 fields, got {len(row)}"))
            continue
        poi_id = row[0].strip()
        name = row[1].strip()
        if not name:
            errors.append(LineError(line_no, "empty name"))
            continue
        category = row[2].strip().lower()
        if category not in known:
            errors.append(LineError(line_no, "unknown category"))
            continue
        try:
            location = _geopoint(row[3], row[4])
            z = _nonneg_int(row[5], "checkins")
        except ValueError as exc:
            errors.append(LineError(line_no, str(exc)))
            continue
        records.append(PoiRecord(poi_id, name, category, location, z))
    return records, errors


def parse_tweets(source: Iterable[str] | TextIO) -> tuple[list[TweetRecord], list[LineError]]:
    """Parse geo-tagged tweets; the text field is RFC-4180 quoted."""
    records: list[TweetRecord] = []
    errors: list[LineError] = []
    for line_no, row in _rows(source, TWEETS_HEADER, "tweets"):
        if len(row) != 5:
            errors.append(LineError(line_no, f"expected 5 fields, got {len(row)}"))
            continue
        try:
            time = parse_timestamp(row[0])
        except ValueError:
            errors.append(LineError(line_no, "bad timestamp"))
            continue
        user_id = row[1].strip()
        if not user_id:
            errors.append(LineError(line_no, "empty user_id"))
            continue
        try:
            location = _geopoint(row[2], row[3])
        except ValueError as exc:
            errors.append(LineError(line_no, str(exc)))
            continue
        records.append(TweetRecord(time, user_id, location, row[4]))
    return records, errors


def parse_weather(source: Iterable[str] | TextIO) -> tuple[list[WeatherDay], list[LineError]]:
    """Parse daily weather rows; empty fields are missing values.

    Duplicate dates are rejected on the later line.
    """
    records: list[WeatherDay] = []
    errors: list[LineError] = []
    seen: set[date] = set()
    for line_no, row in _rows(source, WEATHER_HEADER, "weather"):
        if len(row) != 5:
            errors.append(LineError(line_no, f"expected 5 fields, got {len(row)}"))
            continue
        try:
            day = parse_date(row[0])
        except ValueError:
            errors.append(LineError(line_no, "bad date"))
            continue
        if day in seen:
            errors.append(LineError(line_no, "duplicate date"))
            continue
        values: dict[str, float | None] = {}
        bad = None
        for attr, text in zip(WEATHER_ATTRIBUTES, row[1:]):
            text = text.strip()
            if not text:
                values[attr] = None
                continue
            try:
                value = float(text)
            except ValueError:
                bad = f"unparseable {attr}"
                break
            if not math.isfinite(value):
                bad = f"non-finite {attr}"
                break
            if value < 0:
                bad = f"negative value"
                break
            values[attr] = value
        if bad is not None:
            errors.append(LineError(line_no, bad))
            continue
        seen.add(day)
        records.append(WeatherDay(day, values))
    return records, errors


def parse_collisions(source: Iterable[str] | TextIO) -> tuple[list[CollisionRecord], list[LineError]]:
    """Parse collisions; severity is injured + killed."""
    records: list[CollisionRecord] = []
    errors: list[LineError] = []
    for line_no, row in _rows(source, COLLISIONS_HEADER, "collisions"):
        if len(row) != 5:
            errors.append(LineError(line_no, f"expected 5 fields, got {len(row)}"))
            continue
        try:
            time = parse_timestamp(row[0])
        except ValueError:
            errors.append(LineError(line_no, "bad timestamp"))
            continue
        try:
            location = _geopoint(row[1], row[2])
            injured = _nonneg_int(row[3], "injured")
            killed = _nonneg_int(row[4], "killed")
        except ValueError as exc:
            errors.append(LineError(line_no, str(exc)))
            continue
        records.append(CollisionRecord(time, location, injured + killed))
    return records, errors


def fill_forward(days: list[WeatherDay]) -> list[WeatherDay]:
    """Replace missing attribute values by the previous day's value, else 0.

    Returns new ``WeatherDay`` objects sorted by date; the input is left
    untouched.
    """
    filled: list[WeatherDay] = []
    last: dict[str, float] = {attr: 0.0 for attr in WEATHER_ATTRIBUTES}
    for day in sorted(days, key=lambda d: d.date):
        values: dict[str, float | None] = {}
        for attr in WEATHER_ATTRIBUTES:
            value = day.values.get(attr)
            if value is None:
                value = last[attr]
            last[attr] = value
            values[attr] = value
        filled.append(WeatherDay(day.date, values))
    return filled


# --- writers -------------------------------------------------------------

def _fmt(value: float) -> str:
    return repr(value)


def write_trips(records: Iterable[TripRecord], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(TRIPS_HEADER)
    for r in records:
        w.writerow([
            format_timestamp(r.pickup_time), format_timestamp(r.dropoff_time),
            _fmt(r.pickup.lat), _fmt(r.pickup.lon), _fmt(r.dropoff.lat), _fmt(r.dropoff.lon),
        ])


def write_pois(records: Iterable[PoiRecord], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(POIS_HEADER)
    for r in records:
        w.writerow([r.id, r.name, r.category, _fmt(r.location.lat), _fmt(r.location.lon), r.popularity_z])


def write_tweets(records: Iterable[TweetRecord], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(TWEETS_HEADER)
    for r in records:
        w.writerow([format_timestamp(r.time), r.user_id, _fmt(r.location.lat), _fmt(r.location.lon), r.text])


def write_weather(records: Iterable[WeatherDay], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(WEATHER_HEADER)
    for r in records:
        row = [r.date.isoformat()]
        for attr in WEATHER_ATTRIBUTES:
            value = r.values.get(attr)
            row.append("" if value is None else _fmt(value))
        w.writerow(row)


def write_collisions(records: Iterable[CollisionRecord], out: TextIO) -> None:
    # severity is split back as injured=severity, killed=0; parse_collisions
    # recovers the same severity_s
    w = csv.writer(out, lineterminator="\n")
    w.writerow(COLLISIONS_HEADER)
    for r in records:
        w.writerow([format_timestamp(r.time), _fmt(r.location.lat), _fmt(r.location.lon), r.severity_s, 0])
