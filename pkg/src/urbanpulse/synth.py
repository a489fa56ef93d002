"""Synthetic city with a known generative process, plus brute-force oracles.

The generator draws a city whose hourly traffic rate is

    rate(cell, t) = scale * sum_c mass(cell, c) * g_true(c, hour(t))
                    * storm_damp(day(t))  +  event_spike(cell, t)

POIs carry the mass, a fixed parametric hour-of-day profile family plays
the role of the true category popularity (food peaks at lunch and dinner,
nightlife after dark, and so on), a configured storm multiplies traffic
down with a power-law recovery, and configured event days add evening
spikes backed by bursts of hashtag tweets. Check-ins are emitted
consistently with the true profiles so the popularity table is learnable
from the tweet stream. Everything is drawn from one seeded generator, so a
bundle is a pure function of its config.

``oracle_features`` recomputes every feature value by exhaustive loops
over the raw records, sharing no aggregation code with the features
module; it exists to catch indexing mistakes there, so it must stay naive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .features import FeatureConfig
from .geogrid import CellId, GeoPoint, GridSpec, cell_bounds
from .ingest import (
    POI_CATEGORIES,
    CollisionRecord,
    PoiRecord,
    TweetRecord,
    TripRecord,
    WeatherDay,
    write_collisions,
    write_pois,
    write_trips,
    write_tweets,
    write_weather,
)
from .timebase import format_timestamp, get_zone, local_date

# One flavor word per category, used to build venue names.
_CATEGORY_WORDS = (
    "Gallery", "Campus", "Arena", "Cafe", "Club",
    "Park", "Office", "Tower", "Boutique", "Terminal",
)

# (center hour, width, weight) bumps defining each category's true
# hour-of-day profile; same shape family as observed check-in rhythms but
# parameterized, not copied from any measured curve.
_PROFILE_BUMPS: dict[str, tuple[tuple[float, float, float], ...]] = {
    "arts & entertainment": ((20.0, 2.0, 1.0),),
    "college & education": ((10.0, 2.0, 1.0), (15.0, 2.5, 0.8)),
    "event": ((19.0, 1.5, 1.0),),
    "food": ((12.5, 1.5, 1.0), (19.0, 2.0, 0.9)),
    "nightlife": ((23.5, 2.5, 1.0),),
    "outdoors & recreation": ((11.0, 2.5, 0.7), (16.0, 2.5, 1.0)),
    "professional": ((9.0, 1.5, 1.0), (17.5, 1.5, 0.9)),
    "residence": ((7.5, 1.5, 0.8), (21.0, 2.5, 1.0)),
    "shops": ((13.0, 2.5, 1.0), (18.0, 1.5, 0.6)),
    "travel": ((8.0, 2.0, 1.0), (18.0, 2.0, 1.0)),
}

# relative evening shape of an event-day traffic spike, hours 0..23
_EVENT_SHAPE = np.zeros(24)
_EVENT_SHAPE[17:23] = (0.4, 0.8, 1.0, 1.0, 0.7, 0.3)


def true_popularity() -> np.ndarray:
    """The generator's ground-truth (category, hour) profile, rows sum to 1."""
    g = np.zeros((len(POI_CATEGORIES), 24))
    hours = np.arange(24.0)
    for i, category in enumerate(POI_CATEGORIES):
        profile = np.full(24, 0.02)
        for center, width, weight in _PROFILE_BUMPS[category]:
            delta = np.minimum(np.abs(hours - center), 24.0 - np.abs(hours - center))
            profile += weight * np.exp(-0.5 * (delta / width) ** 2)
        g[i] = profile / profile.sum()
    return g


@dataclass
class SynthConfig:
    """Knobs of the generative process; see module docstring."""

    seed: int
    grid: GridSpec
    start: int  # first hour, UTC epoch seconds (align to local midnight)
    n_days: int = 21
    timezone: str = "UTC"
    pois_per_cell: float = 3.0
    mean_popularity: float = 60.0
    traffic_scale: float = 1.0
    category_mix: np.ndarray | None = None  # (n_rows, n_cols, 10) weights
    event_days: tuple[tuple[int, CellId], ...] = ()
    event_amplitude: float = 60.0
    storm: tuple[int, str, float] | None = None  # (day index, attribute, magnitude)
    storm_damp_frac: float = 0.55
    decay_alpha: float = 2.0
    decay_horizon_days: float = 3.0
    noise_sd: float = 0.05
    checkins_per_day: float = 60.0
    background_tweets_per_day: float = 12.0
    collisions_per_day: float = 12.0

    def __post_init__(self) -> None:
        if self.n_days < 7:
            raise ConfigError("synthetic city needs n_days >= 7")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be >= 0")
        if not 0.0 <= self.storm_damp_frac < 1.0:
            raise ConfigError("storm_damp_frac must be in [0, 1)")
        if self.storm is not None and not 0 <= self.storm[0] < self.n_days:
            raise ConfigError("storm day outside the window")
        for day, cell in self.event_days:
            if not 0 <= day < self.n_days:
                raise ConfigError("event day outside the window")
            if not (0 <= cell.row < self.grid.n_rows and 0 <= cell.col < self.grid.n_cols):
                raise ConfigError("event cell outside the grid")


@dataclass
class SyntheticBundle:
    """A generated city: the five datasets plus the ground-truth rate."""

    config: SynthConfig
    t0: int
    n_hours: int
    pois: list[PoiRecord]
    trips: list[TripRecord]
    tweets: list[TweetRecord]
    weather: list[WeatherDay]
    collisions: list[CollisionRecord]
    rate: np.ndarray  # (n_rows, n_cols, n_hours)
    g_true: np.ndarray = field(repr=False, default=None)


def _uniform_point(rng: np.random.Generator, cell: CellId, grid: GridSpec) -> GeoPoint:
    sw, ne = cell_bounds(cell, grid)
    u, v = rng.random(2)
    # keep a margin off the shared edges so cell membership is unambiguous
    u = 0.02 + 0.96 * u
    v = 0.02 + 0.96 * v
    return GeoPoint(sw.lat + u * (ne.lat - sw.lat), sw.lon + v * (ne.lon - sw.lon))


def _day_starts(config: SynthConfig) -> list[int]:
    tz = get_zone(config.timezone)
    first = datetime.fromtimestamp(config.start, tz)
    return [int((first + timedelta(days=d)).timestamp()) for d in range(config.n_days + 1)]


def generate_city(config: SynthConfig) -> SyntheticBundle:
    """Draw a complete city; byte-identical for identical configs."""
    rng = np.random.default_rng(config.seed)
    grid = config.grid
    n_rows, n_cols = grid.n_rows, grid.n_cols
    n_hours = config.n_days * 24
    g_true = true_popularity()
    tz = get_zone(config.timezone)
    day_starts = _day_starts(config)

    mix = config.category_mix
    if mix is None:
        mix = rng.dirichlet(np.full(len(POI_CATEGORIES), 0.5), size=(n_rows, n_cols))

    # POIs and their per-cell category mass
    pois: list[PoiRecord] = []
    mass = np.zeros((n_rows, n_cols, len(POI_CATEGORIES)))
    counts = rng.poisson(config.pois_per_cell, size=(n_rows, n_cols))
    serial = 0
    for row in range(n_rows):
        for col in range(n_cols):
            for _ in range(counts[row, col]):
                cat = int(rng.choice(len(POI_CATEGORIES), p=mix[row, col]))
                z = max(1, int(rng.poisson(config.mean_popularity)))
                location = _uniform_point(rng, CellId(row, col), grid)
                name = f"{_CATEGORY_WORDS[cat]} {serial:04d}"
                pois.append(PoiRecord(f"p{serial:05d}", name, POI_CATEGORIES[cat], location, z))
                mass[row, col, cat] += z
                serial += 1

    # daily weather; the storm day overrides its attribute
    weather: list[WeatherDay] = []
    first_day = local_date(config.start, tz)
    for d in range(config.n_days):
        wsf2 = round(max(0.5, rng.normal(6.2, 1.2)), 1)
        wsf5 = round(wsf2 * 1.35 + abs(rng.normal(0.0, 0.6)), 1)
        prcp: float | None = round(min(max(rng.normal(3.0, 1.0), 0.0), 5.5), 1)
        snow = 0.0
        missing_roll = rng.random()
        values: dict[str, float | None] = {"WSF2": wsf2, "WSF5": wsf5, "PRCP": prcp, "SNOW": snow}
        if config.storm is not None and config.storm[0] == d:
            attr, magnitude = config.storm[1], config.storm[2]
            values[attr] = float(magnitude)
            if attr == "WSF2":
                values["WSF5"] = round(magnitude * 1.3, 1)
        elif missing_roll < 0.08:
            values["PRCP"] = None
        weather.append(WeatherDay(first_day + timedelta(days=d), values))

    # ground-truth hourly rate
    hods = np.array([datetime.fromtimestamp(config.start + 3600 * h, tz).hour for h in range(n_hours)])
    base = np.einsum("rck,kh->rch", mass, g_true[:, hods]) * config.traffic_scale
    damp = np.ones(n_hours)
    if config.storm is not None:
        storm_day, _, magnitude = config.storm
        lam = magnitude / config.decay_horizon_days**config.decay_alpha
        for h in range(n_hours):
            lag = h // 24 - storm_day
            if lag >= 0:
                impact = max(magnitude - lam * lag**config.decay_alpha, 0.0)
                damp[h] = 1.0 - config.storm_damp_frac * impact / magnitude
    rate = base * damp
    for day, cell in config.event_days:
        spike = config.event_amplitude * _EVENT_SHAPE[hods[day * 24 : (day + 1) * 24]]
        rate[cell.row, cell.col, day * 24 : (day + 1) * 24] += spike

    # check-in tweets, drawn per POI proportional to z with g_true hours
    tweets: list[TweetRecord] = []
    if pois:
        z = np.array([p.popularity_z for p in pois], dtype=float)
        weights = z / z.sum()
        n_checkins = int(rng.poisson(config.checkins_per_day * config.n_days))
        poi_idx = rng.choice(len(pois), size=n_checkins, p=weights)
        days = rng.integers(0, config.n_days, size=n_checkins)
        cat_idx = {c: i for i, c in enumerate(POI_CATEGORIES)}
        for i in range(n_checkins):
            poi = pois[int(poi_idx[i])]
            hod = int(rng.choice(24, p=g_true[cat_idx[poi.category]]))
            t = day_starts[int(days[i])] + hod * 3600 + int(rng.integers(0, 3600))
            tweets.append(TweetRecord(t, f"cu{i:06d}", poi.location, f"I'm at {poi.name}"))

    # event-day tweet bursts (distinct users, hashtagged)
    for day, cell in config.event_days:
        for i in range(int(rng.poisson(25))):
            hod = int(rng.integers(17, 23))
            t = day_starts[day] + hod * 3600 + int(rng.integers(0, 3600))
            tweets.append(
                TweetRecord(t, f"ev{day}_{i:03d}", _uniform_point(rng, cell, grid), f"packed house #day{day}")
            )

    # background chatter from a small recurring user pool
    n_background = int(rng.poisson(config.background_tweets_per_day * config.n_days))
    for i in range(n_background):
        cell = CellId(int(rng.integers(0, n_rows)), int(rng.integers(0, n_cols)))
        t = config.start + int(rng.integers(0, n_hours * 3600))
        user = f"bg{int(rng.integers(0, 150)):03d}"
        text = "crosstown and back #citylife" if rng.random() < 0.5 else "quiet block today"
        tweets.append(TweetRecord(t, user, _uniform_point(rng, cell, grid), text))

    # collisions, uniform in space and time
    collisions: list[CollisionRecord] = []
    for _ in range(int(rng.poisson(config.collisions_per_day * config.n_days))):
        cell = CellId(int(rng.integers(0, n_rows)), int(rng.integers(0, n_cols)))
        t = config.start + int(rng.integers(0, n_hours * 3600))
        severity = int(rng.poisson(0.5)) + (1 if rng.random() < 0.03 else 0)
        collisions.append(CollisionRecord(t, _uniform_point(rng, cell, grid), severity))

    # traffic counts and trip records
    if config.noise_sd == 0.0:
        pick_counts = np.rint(rate).astype(np.int64)
    else:
        jitter = rng.lognormal(mean=-0.5 * config.noise_sd**2, sigma=config.noise_sd, size=rate.shape)
        pick_counts = rng.poisson(rate * jitter)

    trips: list[TripRecord] = []
    flat_cells = [(r, c) for r in range(n_rows) for c in range(n_cols)]
    for h in range(n_hours):
        hour_start = config.start + 3600 * h
        totals = pick_counts[:, :, h]
        n_total = int(totals.sum())
        if n_total == 0:
            continue
        dest_weights = rate[:, :, h].ravel()
        if dest_weights.sum() <= 0:
            dest_weights = np.ones(len(flat_cells))
        dest_weights = dest_weights / dest_weights.sum()
        dest_idx = rng.choice(len(flat_cells), size=n_total, p=dest_weights)
        offsets = rng.integers(0, 3600, size=n_total)
        durations = rng.integers(180, 900, size=n_total)
        k = 0
        for row, col in flat_cells:
            for _ in range(int(totals[row, col])):
                pickup_time = hour_start + int(offsets[k])
                pickup = _uniform_point(rng, CellId(row, col), grid)
                dr, dc = flat_cells[int(dest_idx[k])]
                dropoff = _uniform_point(rng, CellId(dr, dc), grid)
                trips.append(TripRecord(pickup_time, pickup_time + int(durations[k]), pickup, dropoff))
                k += 1

    return SyntheticBundle(
        config=config,
        t0=config.start,
        n_hours=n_hours,
        pois=pois,
        trips=trips,
        tweets=tweets,
        weather=weather,
        collisions=collisions,
        rate=rate,
        g_true=g_true,
    )


def write_bundle(bundle: SyntheticBundle, directory: Path) -> dict[str, Path]:
    """Write the five ingest CSVs plus ground_truth.csv; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {name: directory / f"{name}.csv" for name in
             ("trips", "pois", "tweets", "weather", "collisions", "ground_truth")}
    with open(paths["trips"], "w", encoding="utf-8", newline="") as out:
        write_trips(bundle.trips, out)
    with open(paths["pois"], "w", encoding="utf-8", newline="") as out:
        write_pois(bundle.pois, out)
    with open(paths["tweets"], "w", encoding="utf-8", newline="") as out:
        write_tweets(bundle.tweets, out)
    with open(paths["weather"], "w", encoding="utf-8", newline="") as out:
        write_weather(bundle.weather, out)
    with open(paths["collisions"], "w", encoding="utf-8", newline="") as out:
        write_collisions(bundle.collisions, out)
    with open(paths["ground_truth"], "w", encoding="utf-8") as out:
        out.write("cell_row,cell_col,hour_utc,rate\n")
        for row in range(bundle.config.grid.n_rows):
            for col in range(bundle.config.grid.n_cols):
                for h in range(bundle.n_hours):
                    stamp = format_timestamp(bundle.t0 + 3600 * h)
                    out.write(f"{row},{col},{stamp},{bundle.rate[row, col, h]!r}\n")
    return paths


# --- brute-force oracle -------------------------------------------------------
#
# Everything below recomputes features straight from the record lists with
# plain loops and its own copies of the distance, projection, similarity,
# detection and decay arithmetic. Keep it independent of features.py.

def _oracle_distance_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    rad = math.radians
    h = (
        math.sin(rad(lat2 - lat1) / 2.0) ** 2
        + math.cos(rad(lat1)) * math.cos(rad(lat2)) * math.sin(rad(lon2 - lon1) / 2.0) ** 2
    )
    return 2.0 * 6_371_000.0 * math.asin(min(1.0, math.sqrt(h)))


def _oracle_cell(lat: float, lon: float, grid: GridSpec) -> tuple[int, int] | None:
    coslat0 = math.cos(math.radians(grid.origin.lat))
    east = 6_371_000.0 * math.radians(lon - grid.origin.lon) * coslat0
    north = 6_371_000.0 * math.radians(lat - grid.origin.lat)
    col = math.floor(east / grid.cell_size_m)
    row = math.floor(north / grid.cell_size_m)
    if row < 0 or col < 0 or row >= grid.n_rows or col >= grid.n_cols:
        return None
    return row, col


def _oracle_lcs(a: str, b: str) -> int:
    if not a or not b:
        return 0
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table[len(a)][len(b)]


def _oracle_norm(name: str) -> str:
    return " ".join(name.lower().split())


def oracle_popularity(bundle: SyntheticBundle, config: FeatureConfig) -> np.ndarray:
    """Brute-force popularity table: match every check-in against every POI."""
    tz = get_zone(config.timezone)
    counts = np.zeros((len(POI_CATEGORIES), 24))
    for tweet in bundle.tweets:
        if not tweet.text.startswith("I'm at "):
            continue
        venue = _oracle_norm(tweet.text[len("I'm at "):])
        best = None
        for poi in bundle.pois:
            dist = _oracle_distance_m(
                tweet.location.lat, tweet.location.lon, poi.location.lat, poi.location.lon
            )
            if dist > 100.0:
                continue
            norm = _oracle_norm(poi.name)
            sim = _oracle_lcs(venue, norm) / max(len(venue), len(norm), 1)
            if not venue and not norm:
                sim = 1.0
            if sim <= 0.8:
                continue
            if best is None or (dist, poi.id) < (best[0], best[1]):
                best = (dist, poi.id, poi)
        if best is not None:
            hod = datetime.fromtimestamp(tweet.time, tz).hour
            counts[POI_CATEGORIES.index(best[2].category), hod] += 1
    totals = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)


def oracle_features(
    bundle: SyntheticBundle,
    cell: CellId,
    hour: int,
    config: FeatureConfig,
    popularity: np.ndarray | None = None,
) -> np.ndarray:
    """All feature values of one (cell, hour index) by exhaustive iteration.

    ``popularity`` can carry a precomputed :func:`oracle_popularity` table
    to avoid re-matching check-ins on every call; when omitted it is built
    on the fly.
    """
    if popularity is None:
        popularity = oracle_popularity(bundle, config)
    grid = bundle.config.grid
    tz = get_zone(config.timezone)
    t0 = bundle.t0
    hour_start = t0 + 3600 * hour
    when = datetime.fromtimestamp(hour_start, tz)
    hod = when.hour
    day = when.date()
    day_begin = int(datetime(day.year, day.month, day.day, tzinfo=tz).timestamp())
    day_end = int((datetime(day.year, day.month, day.day, tzinfo=tz) + timedelta(days=1)).timestamp())

    values: list[float] = []

    # POI features: sum of z * g over this cell's POIs, one slot per category
    for cat in POI_CATEGORIES:
        cat_i = POI_CATEGORIES.index(cat)
        total = 0.0
        for poi in bundle.pois:
            if poi.category != cat:
                continue
            if _oracle_cell(poi.location.lat, poi.location.lon, grid) == (cell.row, cell.col):
                total += poi.popularity_z * popularity[cat_i, hod]
        values.append(total)

    # tweet feature: distinct users posting in this cell-hour
    users = set()
    for tweet in bundle.tweets:
        if (tweet.time - t0) // 3600 != hour:
            continue
        if config.hashtag_only and "#" not in tweet.text:
            continue
        if _oracle_cell(tweet.location.lat, tweet.location.lon, grid) == (cell.row, cell.col):
            users.add(tweet.user_id)
    values.append(float(len(users)))

    # weather features: decayed extreme-event impacts for this local day
    for attr in config.weather_attributes:
        observed = [(d.date, d.values.get(attr)) for d in bundle.weather]
        observed = [(d, v) for d, v in observed if v is not None]
        mu = sum(v for _, v in observed) / len(observed)
        sigma = math.sqrt(sum((v - mu) ** 2 for _, v in observed) / len(observed))
        absolute = config.thresholds.get(attr)
        total = 0.0
        for event_day, magnitude in observed:
            if magnitude > mu + 3.0 * sigma or (absolute is not None and magnitude >= absolute):
                lag = (day - event_day).days
                if lag >= 0:
                    lam = magnitude / config.horizon_days**config.alpha
                    total += max(magnitude - lam * lag**config.alpha, 0.0)
        values.append(total)
    if config.include_raw_weather:
        for attr in config.weather_attributes:
            carried = 0.0
            value = 0.0
            for d in sorted(bundle.weather, key=lambda w: w.date):
                observed = d.values.get(attr)
                carried = carried if observed is None else observed
                if d.date == day:
                    value = carried
                    break
            values.append(value)

    # collision feature: severity-weighted count for this local day
    total = 0.0
    for record in bundle.collisions:
        if not day_begin <= record.time < day_end:
            continue
        if _oracle_cell(record.location.lat, record.location.lon, grid) == (cell.row, cell.col):
            total += record.severity_s + 1
    values.append(total)

    return np.array(values)
