from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from lastmile_entropy.analytics import (
    BATTERY_PAIRS,
    compactness,
    correlate,
    correlation_battery,
    entropy_ratio,
    fit_kappa,
    predict_distance,
    route_features,
)
from lastmile_entropy.errors import DomainError, FitError
from lastmile_entropy.ingest import RouteRecord, StopRecord
from lastmile_entropy.synthetic import kappa_corpus, lumpiness_family, route_from_counts


# --- kappa fit ----------------------------------------------------------------


def test_single_point_closed_form():
    fit = fit_kappa([(0.5, 10.4)])
    assert fit.kappa == pytest.approx(10.4) and fit.n_points == 1 and fit.r_squared == 1.0


def test_points_on_asymptote_are_excluded():
    fit = fit_kappa([(0.5, 10.0), (1.0, 99.0), (0.75, 30.0)])
    assert fit.excluded_points == 1 and fit.n_points == 2
    assert fit.kappa == pytest.approx(10.0)


def test_fit_matches_independent_least_squares():
    rng = np.random.default_rng(3)
    g = rng.uniform(0.3, 0.95, 40)
    d = 15 * g / (1 - g) + rng.normal(0, 2, 40)
    fit = fit_kappa(zip(g, d))
    x = (g / (1 - g))[:, None]
    (kappa,), res, *_ = np.linalg.lstsq(x, d, rcond=None)
    assert fit.kappa == pytest.approx(kappa, rel=1e-12)
    assert fit.r_squared == pytest.approx(1 - res[0] / float(d @ d), rel=1e-12)
    assert fit.residual_std == pytest.approx(math.sqrt(res[0] / 39), rel=1e-12)


@given(st.floats(1.0, 100.0), st.lists(st.floats(0.05, 0.98), min_size=1, max_size=30))
def test_noiseless_recovery_exact(kappa, gs):
    fit = fit_kappa([(g, kappa * g / (1 - g)) for g in gs])
    assert fit.kappa == pytest.approx(kappa, rel=1e-9)


def test_fit_errors():
    with pytest.raises(FitError):
        fit_kappa([])
    with pytest.raises(FitError):
        fit_kappa([(1.0, 5.0)])
    with pytest.raises(FitError):
        fit_kappa([(0.0, 5.0), (0.0, 3.0)])
    with pytest.raises(DomainError):
        fit_kappa([(-0.1, 5.0)])


def test_noisy_corpus_recovery():
    routes = kappa_corpus(20.8, 500, 0.05, seed=0)
    fit = fit_kappa((route_features(r)["G_norm"], r.total_distance_km) for r in routes)
    assert 20.4 <= fit.kappa <= 21.2


def test_predict_distance():
    assert predict_distance(20.8, 0.5) == pytest.approx(20.8)
    assert predict_distance(20.8, 0.0) == 0.0
    assert predict_distance(20.8, 0.9) == pytest.approx(187.2)
    assert entropy_ratio(0.75) == pytest.approx(3.0)
    with pytest.raises(DomainError):
        predict_distance(20.8, 1.0)


# --- compactness --------------------------------------------------------------


KM_PER_DEG = math.pi * 6371.0 / 180.0


def equator_route(route_id, n_stops, spacing_km, with_station=False):
    """Stops along the equator exactly ``spacing_km`` apart by great-circle distance."""
    stops = [StopRecord(f"s{i}", 0.0, i * spacing_km / KM_PER_DEG, "home", 1) for i in range(n_stops)]
    if with_station:
        stops.insert(0, StopRecord("depot", 0.0, -5.0, "station", 0))
    return RouteRecord(route_id, "c", tuple(stops))


def test_compactness_examples():
    assert compactness(equator_route("A", 4, 1.0)) == pytest.approx(1.0, rel=1e-12)
    assert compactness(equator_route("B", 3, 0.5)) == pytest.approx(2.0, rel=1e-12)
    same = RouteRecord("C", "c", (StopRecord("a", 1, 1, "home", 1), StopRecord("b", 1, 1, "home", 1)))
    assert compactness(same) == math.inf
    with pytest.raises(DomainError):
        compactness(route_from_counts("D", [3]))


def test_compactness_ignores_station():
    assert compactness(equator_route("A", 3, 1.0, with_station=True)) == pytest.approx(1.0, rel=1e-12)


# --- correlations -------------------------------------------------------------


def test_correlate_matches_scipy():
    rng = np.random.default_rng(0)
    x = rng.normal(size=25)
    y = 0.6 * x + rng.normal(size=25)
    e = correlate("x", "y", x, y)
    r, p = stats.pearsonr(x, y)
    rs, ps = stats.spearmanr(x, y)
    assert e.pearson_rho == pytest.approx(r, abs=1e-12) and e.p_value == pytest.approx(p, rel=1e-9)
    assert e.spearman_rho == pytest.approx(rs, abs=1e-12) and e.spearman_p_value == pytest.approx(ps, rel=1e-9)


def test_constant_series_gives_none():
    e = correlate("x", "y", [1, 1, 1], [1, 2, 3])
    assert e.pearson_rho is None and e.p_value is None and e.n == 3
    with pytest.raises(DomainError):
        correlate("x", "y", [1, 2], [1, 2])
    with pytest.raises(DomainError):
        correlate("x", "y", [1, 2, 3], [1, 2])


def test_lumpiness_family_sign():
    rep = correlation_battery(lumpiness_family())
    assert rep.get("G_norm", "parcels_per_stop_std").pearson_rho <= -0.9
    assert [(e.metric_x, e.metric_y) for e in rep.entries] == list(BATTERY_PAIRS)


def test_exact_scaling_dataset_monotone():
    routes = []
    for i, hub in enumerate(range(2, 30, 3)):
        r = route_from_counts(f"R{i}", [hub] + [1] * 40)
        g = route_features(r)["G_norm"]
        routes.append(route_from_counts(f"R{i}", [hub] + [1] * 40, total_distance_km=20.8 * g / (1 - g)))
    e = correlation_battery(routes).get("G_norm", "distance_km")
    assert e.pearson_rho > 0 and e.spearman_rho == pytest.approx(1.0)


def test_smallest_battery():
    a = route_from_counts("A", [1, 2, 3], total_distance_km=5.0)
    b = route_from_counts("B", [1, 2, 3], total_distance_km=5.0)
    c = route_from_counts("C", [4, 4, 1], total_distance_km=9.0)
    e = correlation_battery([a, b, c]).get("G_norm", "distance_km")
    assert e.n == 3 and e.p_value is not None and math.isfinite(e.p_value)
    with pytest.raises(DomainError):
        correlation_battery([a, b])


def test_battery_skips_infinite_compactness():
    stacked = RouteRecord("S", "c", (StopRecord("a", 1, 1, "home", 1), StopRecord("b", 1, 1, "home", 2)))
    routes = [stacked] + [route_from_counts(f"R{i}", [1, i + 1, 2], spacing_km=0.3 * (i + 1)) for i in range(4)]
    e = correlation_battery(routes).get("G_norm", "compactness")
    assert e.n == 4
