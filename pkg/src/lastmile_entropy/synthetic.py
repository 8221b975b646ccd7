"""Synthetic route and pickup-point generators for tests, demos and fixtures.

All generators are deterministic given their seed.
"""

from __future__ import annotations

import math

import numpy as np

from .entropy import Allocation, profile
from .ingest import HOME, STATION, PickupPoint, RouteRecord, StopRecord

SEATTLE = (47.6062, -122.3321)
KM_PER_DEG_LAT = 111.32


def offset(origin: tuple[float, float], east_km: float, north_km: float) -> tuple[float, float]:
    """Shift a (lat, lon) point by local east/north kilometres (flat-earth approximation)."""
    lat0, lon0 = origin
    lat = lat0 + north_km / KM_PER_DEG_LAT
    lon = lon0 + east_km / (KM_PER_DEG_LAT * math.cos(math.radians(lat0)))
    return (round(lat, 7), round(lon, 7))


def route_from_counts(
    route_id: str,
    counts,
    city: str = "synthetic",
    origin: tuple[float, float] = SEATTLE,
    spacing_km: float = 0.5,
    total_distance_km: float | None = None,
    with_station: bool = False,
) -> RouteRecord:
    """Stops laid out eastwards ``spacing_km`` apart, one per count."""
    stops = []
    if with_station:
        lat, lon = offset(origin, -spacing_km, 0.0)
        stops.append(StopRecord(f"{route_id}-depot", lat, lon, STATION, 0))
    for i, c in enumerate(counts):
        lat, lon = offset(origin, i * spacing_km, 0.0)
        stops.append(StopRecord(f"{route_id}-s{i:03d}", lat, lon, HOME, int(c)))
    return RouteRecord(route_id, city, tuple(stops), total_distance_km)


def hub_counts(n_parcels: int, hub_size: int) -> list[int]:
    """One stop holding ``hub_size`` parcels, the rest single-parcel stops."""
    hub_size = max(1, min(hub_size, n_parcels))
    return [hub_size] + [1] * (n_parcels - hub_size)


def lumpiness_family(n_routes: int = 30, n_parcels: int = 240, max_hub: int = 120) -> list[RouteRecord]:
    """Fixed volume, growing consolidation into a single hub stop."""
    sizes = np.linspace(1, max_hub, n_routes).round().astype(int)
    return [route_from_counts(f"lump-{i:03d}", hub_counts(n_parcels, int(h))) for i, h in enumerate(sizes)]


def fragmentation_family(levels=(0.0, 0.25, 0.5, 0.75, 1.0), n_parcels: int = 120, seed: int = 0) -> list[list[RouteRecord]]:
    """One small dataset per level; higher level means more single-parcel stops."""
    rng = np.random.default_rng(seed)
    datasets = []
    for li, level in enumerate(levels):
        routes = []
        for r in range(3):
            counts, left = [], n_parcels
            while left > 0:
                size = 1 if rng.random() < level else int(rng.integers(2, 7))
                size = min(size, left)
                counts.append(size)
                left -= size
            routes.append(route_from_counts(f"frag{li}-{r}", counts))
        datasets.append(routes)
    return datasets


def random_counts(rng: np.random.Generator, n_parcels: int, single_share: float) -> list[int]:
    counts, left = [], n_parcels
    while left > 0:
        size = 1 if rng.random() < single_share else int(rng.integers(2, 9))
        size = min(size, left)
        counts.append(size)
        left -= size
    return counts


def kappa_corpus(
    kappa: float = 20.8,
    n_routes: int = 500,
    noise: float = 0.05,
    seed: int = 0,
    city: str = "synthetic",
    parcel_range: tuple[int, int] = (60, 260),
    g_max: float = 0.98,
) -> list[RouteRecord]:
    """Routes whose recorded distance follows kappa * g/(1-g) with multiplicative noise.

    The multiplicative noise factor is 1 + noise * z with z standard normal.
    """
    rng = np.random.default_rng(seed)
    routes = []
    for i in range(n_routes):
        n = int(rng.integers(*parcel_range))
        g = 1.0
        while g > g_max:  # keep clear of the g = 1 asymptote, where one route dominates the fit
            counts = random_counts(rng, n, float(rng.uniform(0.2, 0.95)))
            g = profile(Allocation.of(counts)).g_norm
        d = kappa * g / (1.0 - g) * (1.0 + noise * float(rng.standard_normal()))
        routes.append(route_from_counts(f"{city}-{i:04d}", counts, city=city, total_distance_km=d))
    return routes


def consolidation_fixture(
    n_stops: int = 200,
    n_routes: int = 4,
    n_points: int = 6,
    radius_km: float = 2.0,
    seed: int = 7,
    origin: tuple[float, float] = SEATTLE,
) -> tuple[list[RouteRecord], list[PickupPoint]]:
    """Home stops scattered in a disc around ``origin`` plus pickup points inside it."""
    rng = np.random.default_rng(seed)
    points = []
    for j in range(n_points):
        ang = 2 * math.pi * j / n_points
        lat, lon = offset(origin, 0.6 * radius_km * math.cos(ang), 0.6 * radius_km * math.sin(ang))
        points.append(PickupPoint(f"P{j:02d}", lat, lon))
    per_route = np.array_split(np.arange(n_stops), n_routes)
    routes = []
    for r, idx in enumerate(per_route):
        stops = []
        for i in idx:
            rad = radius_km * math.sqrt(float(rng.random()))
            ang = 2 * math.pi * float(rng.random())
            lat, lon = offset(origin, rad * math.cos(ang), rad * math.sin(ang))
            parcels = 1 if rng.random() < 0.65 else int(rng.integers(2, 5))
            stops.append(StopRecord(f"r{r}-s{int(i):03d}", lat, lon, HOME, parcels))
        routes.append(RouteRecord(f"route-{r}", "synthetic", tuple(stops)))
    return routes, points
