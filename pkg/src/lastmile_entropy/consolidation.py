"""Counterfactual spatial consolidation through pickup points.

Each home stop (one customer) adopts pickup delivery with probability
``lambda * P_a(d)``, where ``d`` is the distance to its nearest pickup point
and ``P_a`` a reversed sigmoid in distance. Adopted stops move all their
parcels to that point. Stops already of kind ``pickup`` stay as they are.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .entropy import log_factorial, structural_entropy
from .errors import ConfigError, DomainError
from .ingest import HOME, PICKUP, PickupPoint, RouteRecord, haversine_matrix

EXPECTATION = "expectation"
MONTE_CARLO = "monte_carlo"
MODES = (EXPECTATION, MONTE_CARLO)

DEFAULT_THRESHOLDS = (0.25, 0.5, 1.0)
DEFAULT_BETAS = (1.0, 5.0, 10.0)
DEFAULT_LAMBDAS = (0.25, 0.5, 0.75, 1.0)

SWEEP_COLUMNS = (
    "t",
    "beta",
    "lambda",
    "activated",
    "adopters",
    "parcels_consolidated",
    "g_norm",
    "reduction",
    "g_total_system",
)


@dataclass(frozen=True)
class AdoptionParams:
    threshold_t: float
    beta: float
    lambda_accept: float

    def __post_init__(self):
        if not self.threshold_t > 0:
            raise ConfigError(f"threshold_t must be > 0, got {self.threshold_t}")
        if not self.beta > 0:
            raise ConfigError(f"beta must be > 0, got {self.beta}")
        if not 0.0 <= self.lambda_accept <= 1.0:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lambda_accept}")


def activation_probability(d, params: AdoptionParams):
    """1 / (1 + exp(beta * (d - t))), evaluated without overflow. Accepts arrays."""
    z = params.beta * (np.asarray(d, dtype=float) - params.threshold_t)
    if np.any(np.asarray(d) < 0):
        raise DomainError("distance must be non-negative")
    # exp of a non-positive argument only
    e = np.exp(-np.abs(z))
    p = np.where(z >= 0, e / (1.0 + e), 1.0 / (1.0 + e))
    return float(p) if p.ndim == 0 else p


@dataclass(frozen=True)
class Assignment:
    point_id: str
    distance_km: float


def _id_key(point_id: str):
    return (0, int(point_id), "") if point_id.isdigit() else (1, 0, point_id)


def assign_nearest_pickup(customers: Sequence[tuple[float, float]], points: Sequence[PickupPoint]) -> list[Assignment]:
    """Nearest pickup point per customer; equal distances go to the lowest point_id."""
    if not points:
        raise DomainError("no pickup points to assign to")
    if len(customers) == 0:
        return []
    order = sorted(range(len(points)), key=lambda i: _id_key(points[i].point_id))
    coords = np.array([[points[i].lat, points[i].lon] for i in order])
    dist = haversine_matrix(np.asarray(customers, dtype=float), coords)
    # argmin returns the first minimum, i.e. the lowest id in sorted order
    best = dist.argmin(axis=1)
    return [Assignment(points[order[j]].point_id, float(dist[i, j])) for i, j in enumerate(best)]


@dataclass(frozen=True)
class RouteOutcome:
    route_id: str
    n: int
    g_baseline: float
    g_delivery: float
    c_pickup: int
    g_total_system: float


@dataclass(frozen=True)
class ScenarioResult:
    """Dataset-level outcome of one adoption scenario.

    Shares are fractions in [0, 1]; ``reduction`` is a percentage.
    ``g_norm_delivery`` and ``g_total_system`` are route means of the
    carrier-side and system-wide entropy, each over the route's ln(N!).
    """

    params: AdoptionParams
    mode: str
    activated_share: float
    adopter_share: float
    parcels_consolidated_share: float
    g_norm_delivery: float
    baseline_g_norm: float
    reduction_vs_baseline: float
    c_pickup: int
    g_total_system: float
    routes: tuple[RouteOutcome, ...] = ()

    def row(self) -> dict[str, float]:
        return {
            "t": self.params.threshold_t,
            "beta": self.params.beta,
            "lambda": self.params.lambda_accept,
            "activated": self.activated_share,
            "adopters": self.adopter_share,
            "parcels_consolidated": self.parcels_consolidated_share,
            "g_norm": self.g_norm_delivery,
            "reduction": self.reduction_vs_baseline,
            "g_total_system": self.g_total_system,
        }


@dataclass(frozen=True)
class _PreparedRoute:
    route_id: str
    n: int
    log_n_factorial: float
    home_counts: np.ndarray  # parcels per adoptable home stop
    home_dist: np.ndarray  # km to nearest point
    home_point: np.ndarray  # index into the point list
    home_rank: np.ndarray  # stop indices ordered by distance, then stop order
    fixed_counts: tuple[int, ...]  # pickup-kind stops, untouched
    fixed_parcels_at_pickup: int
    g_baseline: float


@dataclass(frozen=True)
class PreparedDataset:
    routes: tuple[_PreparedRoute, ...]
    point_ids: tuple[str, ...]
    total_parcels: int
    total_home_stops: int


def prepare(routes: Iterable[RouteRecord], points: Sequence[PickupPoint]) -> PreparedDataset:
    """Precompute nearest-point assignments; routes with fewer than 2 parcels are skipped."""
    if not points:
        raise DomainError("no pickup points to assign to")
    point_ids = tuple(p.point_id for p in points)
    index = {pid: i for i, pid in enumerate(point_ids)}
    prepared = []
    for r in routes:
        home = [s for s in r.stops if s.kind == HOME and s.parcel_count >= 1]
        fixed = tuple(s.parcel_count for s in r.stops if s.kind == PICKUP and s.parcel_count >= 1)
        counts = np.array([s.parcel_count for s in home], dtype=np.int64)
        n = int(counts.sum()) + sum(fixed)
        if n < 2:
            continue
        assigned = assign_nearest_pickup([s.latlon for s in home], points)
        dist = np.array([a.distance_km for a in assigned], dtype=float)
        point = np.array([index[a.point_id] for a in assigned], dtype=np.int64)
        rank = np.lexsort((np.arange(len(home)), dist))
        prepared.append(
            _PreparedRoute(
                route_id=r.route_id,
                n=n,
                log_n_factorial=log_factorial(n),
                home_counts=counts,
                home_dist=dist,
                home_point=point,
                home_rank=rank,
                fixed_counts=fixed,
                fixed_parcels_at_pickup=sum(fixed),
                g_baseline=structural_entropy(tuple(counts.tolist()) + fixed),
            )
        )
    if not prepared:
        raise DomainError("dataset has no route with at least two parcels")
    return PreparedDataset(
        routes=tuple(prepared),
        point_ids=point_ids,
        total_parcels=sum(r.n for r in prepared),
        total_home_stops=sum(len(r.home_counts) for r in prepared),
    )


def _route_stream(seed: int, route_id: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(route_id.encode("utf-8"))]))


def _check_mode(mode: str, seed: int | None) -> None:
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}")
    if mode == MONTE_CARLO:
        if seed is None or isinstance(seed, bool) or int(seed) != seed or seed < 0:
            raise ConfigError("monte_carlo mode needs a non-negative integer seed")


def simulate_prepared(
    data: PreparedDataset, params: AdoptionParams, mode: str = EXPECTATION, seed: int | None = None
) -> ScenarioResult:
    _check_mode(mode, seed)
    lam = params.lambda_accept
    activated_total = 0.0
    adopters_total = 0
    at_pickup_total = 0
    outcomes = []
    for r in data.routes:
        n_home = len(r.home_counts)
        p_act = activation_probability(r.home_dist, params) if n_home else np.zeros(0)
        if mode == EXPECTATION:
            activated_total += float(np.sum(p_act))
            n_adopt = int(math.floor(lam * float(np.sum(p_act)) + 0.5))
            adopt = np.zeros(n_home, dtype=bool)
            adopt[r.home_rank[:n_adopt]] = True
        else:
            # same draws for every scenario: common random numbers across a sweep
            u = _route_stream(seed, r.route_id).random((2, n_home))
            activated = u[0] < p_act
            adopt = activated & (u[1] < lam)
            activated_total += int(activated.sum())

        buckets = np.bincount(r.home_point[adopt], weights=r.home_counts[adopt], minlength=len(data.point_ids))
        counts = (
            tuple(r.home_counts[~adopt].tolist())
            + r.fixed_counts
            + tuple(int(round(b)) for b in buckets if b > 0)
        )
        c_pickup = int(adopt.sum())
        g_delivery = structural_entropy(counts)
        g_total = g_delivery + log_factorial(c_pickup)
        adopters_total += c_pickup
        at_pickup_total += int(r.home_counts[adopt].sum()) + r.fixed_parcels_at_pickup
        outcomes.append(RouteOutcome(r.route_id, r.n, r.g_baseline, g_delivery, c_pickup, g_total))

    n_customers = data.total_home_stops
    activated_share = activated_total / n_customers if n_customers else 0.0
    if mode == EXPECTATION:
        adopter_share = lam * activated_share
    else:
        adopter_share = adopters_total / n_customers if n_customers else 0.0
    base = math.fsum(o.g_baseline / r.log_n_factorial for o, r in zip(outcomes, data.routes)) / len(outcomes)
    g_norm = math.fsum(o.g_delivery / r.log_n_factorial for o, r in zip(outcomes, data.routes)) / len(outcomes)
    g_sys = math.fsum(o.g_total_system / r.log_n_factorial for o, r in zip(outcomes, data.routes)) / len(outcomes)
    reduction = 100.0 * (base - g_norm) / base if base > 0 else 0.0
    return ScenarioResult(
        params=params,
        mode=mode if mode == EXPECTATION else f"{MONTE_CARLO}({seed})",
        activated_share=activated_share,
        adopter_share=adopter_share,
        parcels_consolidated_share=at_pickup_total / data.total_parcels,
        g_norm_delivery=g_norm,
        baseline_g_norm=base,
        reduction_vs_baseline=reduction,
        c_pickup=adopters_total,
        g_total_system=g_sys,
        routes=tuple(outcomes),
    )


def simulate(
    routes: Iterable[RouteRecord],
    points: Sequence[PickupPoint],
    params: AdoptionParams,
    mode: str = EXPECTATION,
    seed: int | None = None,
) -> ScenarioResult:
    """Run one adoption scenario.

    In expectation mode each route adopts its round(lambda * sum P_a) stops
    closest to a pickup point (highest adoption probability first). In
    Monte Carlo mode each stop is activated with probability P_a and then
    accepts with probability lambda, using a random stream derived from
    (seed, route_id).
    """
    _check_mode(mode, seed)
    return simulate_prepared(prepare(routes, points), params, mode, seed)


@dataclass(frozen=True)
class SweepGrid:
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    betas: tuple[float, ...] = DEFAULT_BETAS
    lambdas: tuple[float, ...] = DEFAULT_LAMBDAS

    def __post_init__(self):
        for name in ("thresholds", "betas", "lambdas"):
            axis = tuple(float(v) for v in getattr(self, name))
            if not axis:
                raise ConfigError(f"sweep axis {name} is empty")
            object.__setattr__(self, name, axis)

    def cells(self) -> list[AdoptionParams]:
        return [
            AdoptionParams(t, b, lam)
            for t in sorted(self.thresholds)
            for b in sorted(self.betas)
            for lam in sorted(self.lambdas)
        ]


def sweep(
    routes: Iterable[RouteRecord],
    points: Sequence[PickupPoint],
    grid: SweepGrid = SweepGrid(),
    mode: str = EXPECTATION,
    seed: int | None = None,
) -> list[ScenarioResult]:
    """Simulate every grid cell, rows ordered by (t, beta, lambda) ascending."""
    _check_mode(mode, seed)
    data = prepare(routes, points)
    return [simulate_prepared(data, cell, mode, seed) for cell in grid.cells()]
