from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lastmile_entropy.consolidation import (
    EXPECTATION,
    MONTE_CARLO,
    SWEEP_COLUMNS,
    AdoptionParams,
    SweepGrid,
    activation_probability,
    assign_nearest_pickup,
    prepare,
    simulate,
    simulate_prepared,
    sweep,
)
from lastmile_entropy.errors import ConfigError, DomainError
from lastmile_entropy.ingest import PickupPoint, RouteRecord, StopRecord, haversine_km
from lastmile_entropy.synthetic import SEATTLE, consolidation_fixture, offset

from oracles import nearest_by_scan


@pytest.fixture(scope="module")
def fixture():
    return consolidation_fixture()


# --- activation ---------------------------------------------------------------


@pytest.mark.parametrize("beta", [1.0, 5.0, 10.0])
@pytest.mark.parametrize("t", [0.25, 0.5, 1.0])
def test_sigmoid_midpoint(t, beta):
    assert activation_probability(t, AdoptionParams(t, beta, 1.0)) == 0.5


def test_sigmoid_examples():
    assert activation_probability(1.0, AdoptionParams(0.25, 10, 1)) == pytest.approx(1 / (1 + math.exp(7.5)), rel=1e-12)
    assert activation_probability(1.0, AdoptionParams(0.25, 10, 1)) == pytest.approx(5.53e-4, rel=1e-3)
    assert activation_probability(0.0, AdoptionParams(1.0, 1, 1)) == pytest.approx(0.7311, abs=1e-4)


def test_sigmoid_extremes_do_not_overflow():
    p = activation_probability(np.array([0.0, 1e6]), AdoptionParams(1e4, 50, 1))
    assert p[0] == 1.0 and p[1] == 0.0


@given(st.floats(0, 50), st.floats(0, 50), st.floats(0.01, 3), st.floats(0.1, 20))
def test_sigmoid_decreasing_in_distance(d1, d2, t, beta):
    params = AdoptionParams(t, beta, 1.0)
    lo, hi = sorted((d1, d2))
    assert activation_probability(lo, params) >= activation_probability(hi, params)


@pytest.mark.parametrize("kwargs", [dict(threshold_t=0), dict(beta=-1), dict(lambda_accept=1.5)])
def test_params_validation(kwargs):
    base = dict(threshold_t=0.5, beta=5.0, lambda_accept=0.5)
    with pytest.raises(ConfigError):
        AdoptionParams(**{**base, **kwargs})


def test_negative_distance_rejected():
    with pytest.raises(DomainError):
        activation_probability(-1.0, AdoptionParams(1, 1, 1))


# --- nearest assignment -------------------------------------------------------


def test_single_point_takes_everyone():
    pts = [PickupPoint("only", 47.6, -122.3)]
    out = assign_nearest_pickup([(47.0, -122.0), (48.0, -121.0)], pts)
    assert [a.point_id for a in out] == ["only", "only"]


def test_tie_goes_to_lower_id():
    # points mirrored across the equator are exactly equidistant from (0, 0)
    a, b, c = (0.01, 0.0), (-0.01, 0.0), (0.0, 0.0)
    assert haversine_km(c, a) == haversine_km(c, b)
    assert assign_nearest_pickup([c], [PickupPoint("10", *a), PickupPoint("9", *b)])[0].point_id == "9"
    assert assign_nearest_pickup([c], [PickupPoint("beta", *a), PickupPoint("alpha", *b)])[0].point_id == "alpha"


def test_grid_assignment_matches_exhaustive_search():
    customers = [offset(SEATTLE, x, y) for x in (0.0, 3.0) for y in (0.0, 3.0)]
    pts = [PickupPoint("1", *offset(SEATTLE, 0.5, 0.2)), PickupPoint("2", *offset(SEATTLE, 2.5, 2.9))]
    got = [a.point_id for a in assign_nearest_pickup(customers, pts)]
    assert got == [nearest_by_scan(c, pts, haversine_km) for c in customers]


@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=1, max_size=10), st.integers(1, 6))
def test_assignment_property(offsets, n_points):
    rng = np.random.default_rng(n_points)
    pts = [PickupPoint(str(j), *offset(SEATTLE, *rng.uniform(-3, 3, 2))) for j in range(n_points)]
    customers = [offset(SEATTLE, x, y) for x, y in offsets]
    got = assign_nearest_pickup(customers, pts)
    for c, a in zip(customers, got):
        assert a.point_id == nearest_by_scan(c, pts, haversine_km)
        assert a.distance_km == pytest.approx(min(haversine_km(c, (p.lat, p.lon)) for p in pts), abs=1e-9)


def test_assignment_needs_points():
    with pytest.raises(DomainError):
        assign_nearest_pickup([SEATTLE], [])


# --- simulation ---------------------------------------------------------------


def three_stop_route():
    stops = tuple(StopRecord(f"s{i}", *offset(SEATTLE, 0.1 * i, 0.0), "home", 1) for i in range(3))
    return RouteRecord("R", "c", stops)


def test_full_adoption_three_stops():
    res = simulate([three_stop_route()], [PickupPoint("P", *SEATTLE)], AdoptionParams(1e3, 1.0, 1.0))
    (route,) = res.routes
    assert route.g_delivery == 0.0
    assert res.reduction_vs_baseline == pytest.approx(100.0)
    assert res.c_pickup == 3
    assert route.g_total_system == pytest.approx(math.log(6))
    assert res.g_total_system == pytest.approx(1.0)


@pytest.mark.parametrize("mode,seed", [(EXPECTATION, None), (MONTE_CARLO, 5)])
def test_lambda_zero_is_baseline(fixture, mode, seed):
    routes, points = fixture
    res = simulate(routes, points, AdoptionParams(0.5, 5, 0.0), mode, seed)
    assert res.reduction_vs_baseline == 0.0
    assert res.g_norm_delivery == res.baseline_g_norm
    assert res.c_pickup == 0 and res.adopter_share == 0.0


def test_monte_carlo_deterministic(fixture):
    routes, points = fixture
    a = simulate(routes, points, AdoptionParams(0.5, 5, 0.75), MONTE_CARLO, 11)
    b = simulate(routes, points, AdoptionParams(0.5, 5, 0.75), MONTE_CARLO, 11)
    assert a == b
    c = simulate(routes, points, AdoptionParams(0.5, 5, 0.75), MONTE_CARLO, 12)
    assert c != a


def test_monte_carlo_stream_independent_of_route_order(fixture):
    routes, points = fixture
    params = AdoptionParams(0.5, 5, 0.75)
    a = simulate(routes, points, params, MONTE_CARLO, 3)
    b = simulate(list(reversed(routes)), points, params, MONTE_CARLO, 3)
    assert sorted(a.routes, key=lambda r: r.route_id) == sorted(b.routes, key=lambda r: r.route_id)


def test_monte_carlo_mean_matches_expectation(fixture):
    routes, points = fixture
    data = prepare(routes, points)
    params = AdoptionParams(0.5, 5, 0.5)
    exp = simulate_prepared(data, params)
    draws = np.array([simulate_prepared(data, params, MONTE_CARLO, s).adopter_share for s in range(200)])
    se = draws.std(ddof=1) / math.sqrt(len(draws))
    assert abs(draws.mean() - exp.adopter_share) < 4 * se


def test_mode_validation(fixture):
    routes, points = fixture
    p = AdoptionParams(0.5, 5, 0.5)
    with pytest.raises(ConfigError):
        simulate(routes, points, p, MONTE_CARLO, None)
    with pytest.raises(ConfigError):
        simulate(routes, points, p, "vibes")


def test_pickup_kind_stops_are_fixed():
    stops = (
        StopRecord("h0", *SEATTLE, "home", 1),
        StopRecord("h1", *offset(SEATTLE, 0.1, 0), "home", 1),
        StopRecord("locker", *offset(SEATTLE, 0.2, 0), "pickup", 4),
    )
    res = simulate([RouteRecord("R", "c", stops)], [PickupPoint("P", *SEATTLE)], AdoptionParams(0.5, 5, 0.0))
    assert res.parcels_consolidated_share == pytest.approx(4 / 6)
    assert res.routes[0].g_baseline == pytest.approx(math.log(math.factorial(6) / math.factorial(4)))


def test_tiny_routes_skipped():
    one = RouteRecord("tiny", "c", (StopRecord("a", *SEATTLE, "home", 1),))
    with pytest.raises(DomainError):
        prepare([one], [PickupPoint("P", *SEATTLE)])
    res = simulate([one, three_stop_route()], [PickupPoint("P", *SEATTLE)], AdoptionParams(1, 1, 0))
    assert [r.route_id for r in res.routes] == ["R"]


# --- sweep --------------------------------------------------------------------


def test_default_grid_has_36_rows_in_order(fixture):
    routes, points = fixture
    rows = sweep(routes, points)
    assert len(rows) == 36
    keys = [(r.params.threshold_t, r.params.beta, r.params.lambda_accept) for r in rows]
    assert keys == sorted(keys)
    assert set(rows[0].row()) == set(SWEEP_COLUMNS)


def test_sweep_directional_properties(fixture):
    routes, points = fixture
    rows = {(r.params.threshold_t, r.params.beta, r.params.lambda_accept): r for r in sweep(routes, points)}
    grid = SweepGrid()
    for t in grid.thresholds:
        for b in grid.betas:
            g = [rows[(t, b, lam)].g_norm_delivery for lam in grid.lambdas]
            assert all(y <= x + 1e-12 for x, y in zip(g, g[1:]))
    for b in grid.betas:
        for lam in grid.lambdas:
            g = [rows[(t, b, lam)].g_norm_delivery for t in grid.thresholds]
            assert all(y <= x + 1e-12 for x, y in zip(g, g[1:]))
    best = max(rows.values(), key=lambda r: r.reduction_vs_baseline)
    assert (best.params.threshold_t, best.params.beta, best.params.lambda_accept) == (1.0, 10.0, 1.0)


def test_grid_validation():
    with pytest.raises(ConfigError):
        SweepGrid(thresholds=())
