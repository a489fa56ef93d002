"""Regression targets and the four feature families.

Per grid cell and hour the design matrix row is

    x_t = [poi features (10), tweet users (1), weather impacts (k), collisions (1)]

POI features modulate each cell's static check-in mass by the hour-of-day
popularity of its categories. Tweet features count distinct posting users.
Weather features sum power-law-decaying impacts of detected extreme events.
Collision features count severity-weighted collisions. Weather and
collision values are daily quantities broadcast to all 24 hours of their
local day; the regression target is hourly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import AssemblyError, ConfigError, DetectionError
from .geogrid import CellId, GridSpec, haversine, locate
from .ingest import (
    POI_CATEGORIES,
    CollisionRecord,
    PoiRecord,
    TweetRecord,
    TripRecord,
    WeatherDay,
    fill_forward,
)
from .timebase import format_timestamp, get_zone, hour_index, hour_of_day, local_date

CHECKIN_PREFIX = "I'm at "
CHECKIN_MAX_DISTANCE_M = 100.0
CHECKIN_MIN_SIMILARITY = 0.8  # strict: similarity must exceed this

# Absolute event thresholds (value >= threshold flags a day regardless of
# the mu+3*sigma rule). Wind defaults follow the category-1 hurricane onset
# of 33 m/s sustained; precipitation and snow have no absolute default.
DEFAULT_THRESHOLDS: dict[str, float | None] = {
    "WSF2": 33.0,
    "WSF5": 33.0,
    "PRCP": None,
    "SNOW": None,
}


@dataclass
class TrafficSeries:
    """Per-cell hourly pick-up and drop-off counts."""

    grid: GridSpec
    t0: int  # first hour, UTC epoch seconds, hour-aligned
    n_hours: int
    pickups: np.ndarray  # (n_rows, n_cols, n_hours) int64
    dropoffs: np.ndarray


@dataclass
class PopularityTable:
    """Hour-of-day check-in profile per POI category.

    Rows follow ``POI_CATEGORIES`` order and sum to 1, or are all-zero for
    categories without check-ins.
    """

    g: np.ndarray  # (10, 24)

    def weight(self, category: str, hour: int) -> float:
        return float(self.g[POI_CATEGORIES.index(category), hour])


@dataclass(frozen=True, slots=True)
class ExtremeEvent:
    attribute: str
    t_e: date
    magnitude: float


@dataclass
class FeatureMatrix:
    """Design matrix of one grid cell over a contiguous hour range."""

    cell: CellId
    times: np.ndarray  # hour starts, UTC epoch seconds
    X: np.ndarray  # (n_hours, n_features)
    column_names: list[str]
    group_labels: list[str]  # 'P' | 'T' | 'W' | 'C' per column
    y_pick: np.ndarray
    y_drop: np.ndarray

    def y(self, target: str) -> np.ndarray:
        if target == "pickup":
            return self.y_pick
        if target == "dropoff":
            return self.y_drop
        raise ValueError(f"unknown target {target!r}")

    def group_columns(self, groups: Iterable[str]) -> np.ndarray:
        wanted = set(groups)
        idx = [i for i, g in enumerate(self.group_labels) if g in wanted]
        return np.asarray(idx, dtype=int)


@dataclass
class FeatureConfig:
    """Feature-building knobs; defaults mirror the standard protocol."""

    timezone: str = "America/New_York"
    hashtag_only: bool = False
    include_raw_weather: bool = False
    weather_attributes: tuple[str, ...] = ("WSF2", "PRCP", "SNOW")
    thresholds: dict[str, float | None] = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))
    alpha: float = 2.0
    horizon_days: float = 3.0


# --- traffic aggregation ---------------------------------------------------

def aggregate_traffic(trips: Sequence[TripRecord], grid: GridSpec, t0: int, n_hours: int) -> TrafficSeries:
    """Count pick-ups and drop-offs per (cell, hour).

    Each endpoint is bucketed independently: a trip with an in-grid pickup
    and an out-of-grid (or out-of-window) dropoff still counts its pickup.
    Hour buckets use floor semantics, so a timestamp exactly on the hour
    boundary belongs to that hour.
    """
    if n_hours <= 0:
        raise ConfigError("n_hours must be positive")
    pickups = np.zeros((grid.n_rows, grid.n_cols, n_hours), dtype=np.int64)
    dropoffs = np.zeros_like(pickups)
    for trip in trips:
        h = hour_index(trip.pickup_time, t0)
        if 0 <= h < n_hours:
            cell = locate(trip.pickup, grid)
            if cell is not None:
                pickups[cell.row, cell.col, h] += 1
        h = hour_index(trip.dropoff_time, t0)
        if 0 <= h < n_hours:
            cell = locate(trip.dropoff, grid)
            if cell is not None:
                dropoffs[cell.row, cell.col, h] += 1
    return TrafficSeries(grid, t0, n_hours, pickups, dropoffs)


# --- check-in matching and POI popularity ----------------------------------

def lcs_similarity(a: str, b: str) -> float:
    """Longest-common-subsequence length divided by the longer length.

    Two empty strings are defined as identical (similarity 1).
    """
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    # classic O(len(a)*len(b)) DP, two rolling rows
    prev = [0] * (len(b) + 1)
    for ch_a in a:
        cur = [0]
        for j, ch_b in enumerate(b, start=1):
            if ch_a == ch_b:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[len(b)] / max(len(a), len(b))


def normalize_name(name: str) -> str:
    """Lowercase and collapse internal whitespace for name comparison."""
    return " ".join(name.lower().split())


def match_checkins(
    tweets: Sequence[TweetRecord], pois: Sequence[PoiRecord]
) -> list[tuple[TweetRecord, PoiRecord]]:
    """Pair check-in tweets ("I'm at <venue>") with the POIs they announce.

    A tweet matches a POI when it was posted within 100 m of the venue and
    the announced name resembles the POI name (LCS similarity strictly
    above 0.8 on lowercased, whitespace-collapsed strings). Among multiple
    qualifying POIs the nearest wins; exact distance ties go to the smaller
    POI id.
    """
    if not pois:
        return []
    poi_lat = np.array([p.location.lat for p in pois])
    poi_lon = np.array([p.location.lon for p in pois])
    poi_norm = [normalize_name(p.name) for p in pois]
    # coarse bounding box: 100 m in degrees, padded
    dlat = np.degrees(CHECKIN_MAX_DISTANCE_M / 6_371_000.0) * 1.1
    matches: list[tuple[TweetRecord, PoiRecord]] = []
    for tweet in tweets:
        if not tweet.text.startswith(CHECKIN_PREFIX):
            continue
        venue = normalize_name(tweet.text[len(CHECKIN_PREFIX):])
        coslat = max(np.cos(np.radians(tweet.location.lat)), 1e-9)
        near = np.flatnonzero(
            (np.abs(poi_lat - tweet.location.lat) <= dlat)
            & (np.abs(poi_lon - tweet.location.lon) <= dlat / coslat)
        )
        best: tuple[float, str, PoiRecord] | None = None
        for i in near:
            poi = pois[i]
            dist = haversine(tweet.location, poi.location)
            if dist > CHECKIN_MAX_DISTANCE_M:
                continue
            if lcs_similarity(venue, poi_norm[i]) <= CHECKIN_MIN_SIMILARITY:
                continue
            key = (dist, poi.id)
            if best is None or key < (best[0], best[1]):
                best = (dist, poi.id, poi)
        if best is not None:
            matches.append((tweet, best[2]))
    return matches


def temporal_popularity(
    matches: Sequence[tuple[TweetRecord, PoiRecord]], timezone: str = "America/New_York"
) -> PopularityTable:
    """Aggregate matched check-ins by (category, local hour) and normalize
    each category row to unit sum."""
    tz = get_zone(timezone)
    counts = np.zeros((len(POI_CATEGORIES), 24))
    cat_index = {c: i for i, c in enumerate(POI_CATEGORIES)}
    for tweet, poi in matches:
        counts[cat_index[poi.category], hour_of_day(tweet.time, tz)] += 1
    totals = counts.sum(axis=1, keepdims=True)
    g = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
    return PopularityTable(g)


# --- POI features -----------------------------------------------------------

def poi_category_mass(pois: Sequence[PoiRecord], grid: GridSpec) -> np.ndarray:
    """Total check-in mass z per (cell, category); POIs outside are dropped."""
    mass = np.zeros((grid.n_rows, grid.n_cols, len(POI_CATEGORIES)))
    cat_index = {c: i for i, c in enumerate(POI_CATEGORIES)}
    for poi in pois:
        cell = locate(poi.location, grid)
        if cell is not None:
            mass[cell.row, cell.col, cat_index[poi.category]] += poi.popularity_z
    return mass


def poi_feature(
    pois: Sequence[PoiRecord],
    g: PopularityTable,
    grid: GridSpec,
    t: int,
    timezone: str = "America/New_York",
) -> np.ndarray:
    """Per-cell 10-vector of category mass scaled by hour-of-day popularity.

    ``t`` is the hour start in UTC epoch seconds.
    """
    hod = hour_of_day(t, get_zone(timezone))
    return poi_category_mass(pois, grid) * g.g[:, hod]


# --- tweet features ---------------------------------------------------------

def _tweet_passes(tweet: TweetRecord, hashtag_only: bool) -> bool:
    return not hashtag_only or "#" in tweet.text


def tweet_feature(
    tweets: Sequence[TweetRecord], grid: GridSpec, t: int, hashtag_only: bool = False
) -> np.ndarray:
    """Per-cell count of distinct users posting during hour ``t``.

    Counting users rather than posts blunts spammers; with ``hashtag_only``
    only tweets containing a '#' are considered.
    """
    users: dict[tuple[int, int], set[str]] = {}
    for tweet in tweets:
        if tweet.time - tweet.time % 3600 != t:
            continue
        if not _tweet_passes(tweet, hashtag_only):
            continue
        cell = locate(tweet.location, grid)
        if cell is None:
            continue
        users.setdefault((cell.row, cell.col), set()).add(tweet.user_id)
    out = np.zeros((grid.n_rows, grid.n_cols))
    for (row, col), ids in users.items():
        out[row, col] = len(ids)
    return out


def tweet_user_counts(
    tweets: Sequence[TweetRecord], grid: GridSpec, t0: int, n_hours: int, hashtag_only: bool = False
) -> np.ndarray:
    """Distinct posting users per (cell, hour) over a whole window."""
    users: dict[tuple[int, int, int], set[str]] = {}
    for tweet in tweets:
        h = hour_index(tweet.time, t0)
        if not 0 <= h < n_hours:
            continue
        if not _tweet_passes(tweet, hashtag_only):
            continue
        cell = locate(tweet.location, grid)
        if cell is None:
            continue
        users.setdefault((cell.row, cell.col, h), set()).add(tweet.user_id)
    out = np.zeros((grid.n_rows, grid.n_cols, n_hours))
    for (row, col, h), ids in users.items():
        out[row, col, h] = len(ids)
    return out


# --- weather features --------------------------------------------------------

def detect_extreme_events(
    weather: Sequence[WeatherDay],
    attribute: str,
    thresholds: dict[str, float | None] | None = None,
) -> list[ExtremeEvent]:
    """Flag days whose value exceeds mu + 3*sigma (strictly) or reaches the
    attribute's absolute scale threshold.

    Statistics are taken over the supplied days; missing values are
    excluded. Consecutive flagged days become separate events, each keeping
    its own day's value as magnitude.
    """
    if thresholds is None:
        thresholds = DEFAULT_THRESHOLDS
    present = [(day.date, day.values.get(attribute)) for day in weather]
    present = [(d, v) for d, v in present if v is not None]
    if not present:
        raise DetectionError(f"no observations for {attribute}")
    if len(present) < 2:
        raise DetectionError(f"need at least 2 observations for {attribute}")
    values = np.array([v for _, v in present])
    mu = float(values.mean())
    sigma = float(values.std())
    absolute = thresholds.get(attribute)
    events = []
    for day, value in present:
        if value > mu + 3.0 * sigma or (absolute is not None and value >= absolute):
            events.append(ExtremeEvent(attribute, day, value))
    return events


def decay_value(magnitude: float, lag_days: float, alpha: float, horizon_days: float) -> float:
    """Power-law decayed impact ``max(magnitude - lam*lag^alpha, 0)``.

    ``lam`` is fixed so the impact hits exactly 0 at the horizon; before
    the event (negative lag) the impact is 0. ``alpha > 1`` makes the decay
    start slow and steepen, which models lingering disruption.
    """
    if alpha <= 1.0:
        raise ConfigError("decay alpha must be > 1")
    if horizon_days <= 0:
        raise ConfigError("decay horizon must be positive")
    if lag_days < 0:
        return 0.0
    lam = magnitude / horizon_days**alpha
    return max(magnitude - lam * lag_days**alpha, 0.0)


def decay_impact(event: ExtremeEvent, t: date, alpha: float, horizon_days: float) -> float:
    """Impact of one extreme event on day ``t`` (integer-day lag)."""
    return decay_value(event.magnitude, (t - event.t_e).days, alpha, horizon_days)


def weather_feature(
    events: Sequence[ExtremeEvent], attribute: str, t: date, alpha: float = 2.0, horizon_days: float = 3.0
) -> float:
    """Summed decayed impact of all events of one attribute on day ``t``."""
    return sum(
        decay_impact(event, t, alpha, horizon_days) for event in events if event.attribute == attribute
    )


# --- collision features --------------------------------------------------------

def collision_feature(
    collisions: Sequence[CollisionRecord], grid: GridSpec, t: date, timezone: str = "America/New_York"
) -> np.ndarray:
    """Per-cell severity-weighted collision count for local day ``t``.

    Every collision contributes severity+1, so a no-injury collision still
    counts once.
    """
    tz = get_zone(timezone)
    out = np.zeros((grid.n_rows, grid.n_cols))
    for record in collisions:
        if local_date(record.time, tz) != t:
            continue
        cell = locate(record.location, grid)
        if cell is None:
            continue
        out[cell.row, cell.col] += record.severity_s + 1
    return out


def collision_day_counts(
    collisions: Sequence[CollisionRecord], grid: GridSpec, days: Sequence[date], timezone: str
) -> np.ndarray:
    """Severity-weighted counts per (cell, local day) over a day range."""
    tz = get_zone(timezone)
    index = {day: i for i, day in enumerate(days)}
    out = np.zeros((grid.n_rows, grid.n_cols, len(days)))
    for record in collisions:
        i = index.get(local_date(record.time, tz))
        if i is None:
            continue
        cell = locate(record.location, grid)
        if cell is None:
            continue
        out[cell.row, cell.col, i] += record.severity_s + 1
    return out


# --- assembly -----------------------------------------------------------------

def assemble_matrix(
    cell: CellId,
    traffic: TrafficSeries,
    poi_block: np.ndarray,
    tweet_col: np.ndarray,
    weather_block: np.ndarray,
    collision_col: np.ndarray,
    weather_names: Sequence[str],
) -> FeatureMatrix:
    """Stack per-cell feature blocks into one design matrix.

    Column order is fixed: the 10 POI categories (alphabetical), tweet
    users, weather attributes (configured order), collisions. All blocks
    must cover the same hour range as the traffic series.
    """
    n = traffic.n_hours
    blocks = {
        "poi": poi_block,
        "tweet": tweet_col,
        "weather": weather_block,
        "collision": collision_col,
    }
    for name, block in blocks.items():
        if block.shape[0] != n:
            raise AssemblyError(f"{name} block covers {block.shape[0]} hours, traffic has {n}")
    X = np.column_stack([poi_block, tweet_col, weather_block, collision_col])
    names = [f"P:{c}" for c in POI_CATEGORIES]
    labels = ["P"] * len(POI_CATEGORIES)
    names.append("T:tweet_users")
    labels.append("T")
    names.extend(f"W:{name}" for name in weather_names)
    labels.extend("W" for _ in weather_names)
    names.append("C:collisions")
    labels.append("C")
    times = traffic.t0 + 3600 * np.arange(n, dtype=np.int64)
    return FeatureMatrix(
        cell=cell,
        times=times,
        X=X,
        column_names=names,
        group_labels=labels,
        y_pick=traffic.pickups[cell.row, cell.col].copy(),
        y_drop=traffic.dropoffs[cell.row, cell.col].copy(),
    )


def build_feature_matrices(
    traffic: TrafficSeries,
    pois: Sequence[PoiRecord],
    tweets: Sequence[TweetRecord],
    weather: Sequence[WeatherDay],
    collisions: Sequence[CollisionRecord],
    config: FeatureConfig,
) -> list[FeatureMatrix]:
    """Build one FeatureMatrix per grid cell over the traffic window."""
    grid = traffic.grid
    tz = get_zone(config.timezone)
    n = traffic.n_hours
    hours = traffic.t0 + 3600 * np.arange(n, dtype=np.int64)
    hods = np.array([hour_of_day(int(t), tz) for t in hours])
    dates = [local_date(int(t), tz) for t in hours]
    unique_days = sorted(set(dates))
    day_pos = {day: i for i, day in enumerate(unique_days)}
    hour_day = np.array([day_pos[d] for d in dates])

    # POI block: static mass modulated by the estimated hourly popularity
    g = temporal_popularity(match_checkins(tweets, pois), config.timezone)
    mass = poi_category_mass(pois, grid)  # (rows, cols, 10)
    poi_hourly = g.g[:, hods]  # (10, n)

    tweet_counts = tweet_user_counts(tweets, grid, traffic.t0, n, config.hashtag_only)

    # weather: day-level values broadcast to hours, identical for all cells
    weather_names: list[str] = []
    weather_day_cols: list[np.ndarray] = []
    for attr in config.weather_attributes:
        events = detect_extreme_events(weather, attr, config.thresholds)
        col = np.array(
            [weather_feature(events, attr, day, config.alpha, config.horizon_days) for day in unique_days]
        )
        weather_day_cols.append(col)
        weather_names.append(attr)
    if config.include_raw_weather:
        filled = {day.date: day.values for day in fill_forward(list(weather))}
        for attr in config.weather_attributes:
            col = np.array([filled.get(day, {}).get(attr, 0.0) or 0.0 for day in unique_days])
            weather_day_cols.append(col)
            weather_names.append(f"raw_{attr}")
    weather_block = np.column_stack(weather_day_cols)[hour_day]  # (n, k)

    collision_days = collision_day_counts(collisions, grid, unique_days, config.timezone)

    matrices = []
    for cell in grid.cells():
        poi_block = (mass[cell.row, cell.col][:, None] * poi_hourly).T  # (n, 10)
        tweet_col = tweet_counts[cell.row, cell.col]
        collision_col = collision_days[cell.row, cell.col][hour_day]
        matrices.append(
            assemble_matrix(cell, traffic, poi_block, tweet_col, weather_block, collision_col, weather_names)
        )
    return matrices


def write_feature_csv(fm: FeatureMatrix, target: str, out: TextIO, config_hash: str | None = None) -> None:
    """Export one cell's matrix as CSV with group-tagged column names."""
    if config_hash:
        out.write(f"# config_sha256={config_hash}\n")
    header = ["cell_row", "cell_col", "hour_utc", *fm.column_names, "y"]
    out.write(",".join(header) + "\n")
    y = fm.y(target)
    for i in range(len(fm.times)):
        row = [str(fm.cell.row), str(fm.cell.col), format_timestamp(int(fm.times[i]))]
        row.extend(repr(float(v)) for v in fm.X[i])
        row.append(str(int(y[i])))
        out.write(",".join(row) + "\n")
