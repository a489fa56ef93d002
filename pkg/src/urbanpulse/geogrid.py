"""Geodesic distance and metric grid partitioning.

A city is covered by a regular grid of square cells (``cell_size_m`` on a
side, 500 m by default) anchored at a south-west origin. Points are mapped
to cells through a local equirectangular projection about the origin:

    east  = R * radians(lon - origin.lon) * cos(radians(origin.lat))
    north = R * radians(lat - origin.lat)

The projection error stays below 0.5% at city scale (< 50 km), which is why
no external projection library is needed. Points exactly on a shared cell
edge belong to the cell with the larger index (floor semantics), so counts
are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_M = 6_371_000.0


@dataclass(frozen=True, slots=True)
class GeoPoint:
    """A WGS-ish latitude/longitude pair in degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError("non-finite coordinate")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError("lat out of range")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError("lon out of range")


@dataclass(frozen=True, slots=True)
class CellId:
    """Zero-based (row, col) index of one grid cell."""

    row: int
    col: int


@dataclass(frozen=True, slots=True)
class GridSpec:
    """Metric grid over a geographic bounding box.

    ``origin`` is the south-west corner; rows grow northward, columns grow
    eastward.
    """

    origin: GeoPoint
    n_rows: int
    n_cols: int
    cell_size_m: float = 500.0

    def __post_init__(self) -> None:
        if self.cell_size_m <= 0:
            raise ValueError("cell_size_m must be > 0")
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValueError("grid must contain at least one cell")
        # the covered bbox must stay within valid lat/lon
        ne = self._inverse(self.n_rows * self.cell_size_m, self.n_cols * self.cell_size_m)
        if not (-90.0 <= ne[0] <= 90.0 and -180.0 <= ne[1] <= 180.0):
            raise ValueError("grid extends outside valid lat/lon")

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_cols

    def cells(self):
        """Iterate all cells in row-major order."""
        for row in range(self.n_rows):
            for col in range(self.n_cols):
                yield CellId(row, col)

    def _inverse(self, north_m: float, east_m: float) -> tuple[float, float]:
        # inverse of the equirectangular projection; returns (lat, lon)
        coslat0 = math.cos(math.radians(self.origin.lat))
        lat = self.origin.lat + math.degrees(north_m / EARTH_RADIUS_M)
        lon = self.origin.lon + math.degrees(east_m / (EARTH_RADIUS_M * coslat0))
        return lat, lon


def haversine(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters on a sphere of radius 6,371,000 m."""
    lat1 = math.radians(a.lat)
    lat2 = math.radians(b.lat)
    dlat = lat2 - lat1
    dlon = math.radians(b.lon - a.lon)
    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def locate(p: GeoPoint, grid: GridSpec) -> CellId | None:
    """Map a point to its grid cell, or ``None`` when it falls outside."""
    coslat0 = math.cos(math.radians(grid.origin.lat))
    east = EARTH_RADIUS_M * math.radians(p.lon - grid.origin.lon) * coslat0
    north = EARTH_RADIUS_M * math.radians(p.lat - grid.origin.lat)
    col = math.floor(east / grid.cell_size_m)
    row = math.floor(north / grid.cell_size_m)
    if row < 0 or col < 0 or row >= grid.n_rows or col >= grid.n_cols:
        return None
    return CellId(row, col)


def cell_bounds(cell: CellId, grid: GridSpec) -> tuple[GeoPoint, GeoPoint]:
    """South-west and north-east corners of ``cell``.

    ``locate`` on the SW corner (and on the cell center) returns ``cell``
    again; the NE corner belongs to the neighbouring cell by floor
    semantics.
    """
    if not (0 <= cell.row < grid.n_rows and 0 <= cell.col < grid.n_cols):
        raise ValueError(f"cell {cell} outside grid bounds")
    s = grid.cell_size_m
    sw = grid._inverse(cell.row * s, cell.col * s)
    ne = grid._inverse((cell.row + 1) * s, (cell.col + 1) * s)
    return GeoPoint(*sw), GeoPoint(*ne)


def cell_center(cell: CellId, grid: GridSpec) -> GeoPoint:
    """Center point of ``cell``."""
    if not (0 <= cell.row < grid.n_rows and 0 <= cell.col < grid.n_cols):
        raise ValueError(f"cell {cell} outside grid bounds")
    s = grid.cell_size_m
    lat, lon = grid._inverse((cell.row + 0.5) * s, (cell.col + 0.5) * s)
    return GeoPoint(lat, lon)
