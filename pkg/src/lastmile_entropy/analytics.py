"""Cross-metric validation: entropy-distance scaling law, correlations, compactness."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import DomainError, FitError
from .ingest import RouteRecord, haversine_km, route_distance_km, route_metrics, to_allocation

EXCLUSION_EPS = 1e-6


@dataclass(frozen=True)
class ScalingFit:
    """Fit of d = kappa * g / (1 - g) through the origin.

    ``r_squared`` is the uncentred coefficient 1 - SS_res / sum(d^2), the
    appropriate measure for a model without intercept.
    """

    kappa: float
    r_squared: float
    n_points: int
    residual_std: float
    excluded_points: int


def entropy_ratio(g_norm: float) -> float:
    return g_norm / (1.0 - g_norm)


def fit_kappa(points: Iterable[tuple[float, float]], eps: float = EXCLUSION_EPS) -> ScalingFit:
    xs, ds, excluded = [], [], 0
    for g, d in points:
        if g is None or not math.isfinite(g) or not math.isfinite(d):
            excluded += 1
            continue
        if g < 0:
            raise DomainError(f"g_norm must be >= 0, got {g}")
        if g >= 1.0 - eps:
            excluded += 1
            continue
        xs.append(entropy_ratio(g))
        ds.append(d)
    if not xs:
        raise FitError(f"no usable points ({excluded} excluded near g_norm = 1)")
    x = np.asarray(xs)
    d = np.asarray(ds)
    sxx = float(x @ x)
    if sxx == 0.0:
        raise FitError("degenerate fit: every point has g_norm = 0")
    kappa = float(x @ d) / sxx
    resid = d - kappa * x
    ss_res = float(resid @ resid)
    ss_tot = float(d @ d)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    n = len(xs)
    return ScalingFit(
        kappa=kappa,
        r_squared=min(max(r2, 0.0), 1.0),
        n_points=n,
        residual_std=math.sqrt(ss_res / max(n - 1, 1)),
        excluded_points=excluded,
    )


def predict_distance(kappa: float, g_norm: float) -> float:
    if not 0.0 <= g_norm < 1.0:
        raise DomainError(f"g_norm must lie in [0, 1), got {g_norm}")
    return kappa * entropy_ratio(g_norm)


def compactness(r: RouteRecord) -> float:
    """Inverse mean consecutive spacing (per km) of non-station stops; inf if all coincide."""
    stops = r.demand_stops
    if len(stops) < 2:
        raise DomainError(f"route {r.route_id!r} needs two non-station stops for compactness")
    legs = [haversine_km(a.latlon, b.latlon) for a, b in zip(stops, stops[1:])]
    mean = math.fsum(legs) / len(legs)
    return math.inf if mean == 0.0 else 1.0 / mean


@dataclass(frozen=True)
class CorrelationEntry:
    """Pearson and Spearman coefficients with two-sided t-approximation p-values.

    Coefficients and p-values are ``None`` when either series is constant.
    """

    metric_x: str
    metric_y: str
    pearson_rho: float | None
    spearman_rho: float | None
    p_value: float | None
    spearman_p_value: float | None
    n: int


@dataclass(frozen=True)
class CorrelationReport:
    entries: tuple[CorrelationEntry, ...]

    def get(self, metric_x: str, metric_y: str) -> CorrelationEntry:
        for e in self.entries:
            if (e.metric_x, e.metric_y) == (metric_x, metric_y):
                return e
        raise KeyError((metric_x, metric_y))


def _pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return None
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def _t_pvalue(r: float | None, n: int) -> float | None:
    if r is None:
        return None
    if abs(r) >= 1.0:
        return 0.0
    df = n - 2
    t = r * math.sqrt(df / (1.0 - r * r))
    return float(2.0 * stats.t.sf(abs(t), df))


def correlate(name_x: str, name_y: str, xs: Sequence[float], ys: Sequence[float]) -> CorrelationEntry:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if len(x) != len(y):
        raise DomainError("series lengths differ")
    if len(x) < 3:
        raise DomainError(f"need at least 3 observations to correlate {name_x} and {name_y}")
    rho = _pearson(x, y)
    rank_rho = _pearson(stats.rankdata(x), stats.rankdata(y))
    n = len(x)
    return CorrelationEntry(name_x, name_y, rho, rank_rho, _t_pvalue(rho, n), _t_pvalue(rank_rho, n), n)


BATTERY_PAIRS = (
    ("G_norm", "parcels_per_stop_std"),
    ("G_norm", "compactness"),
    ("G_norm", "distance_km"),
    ("N", "distance_km"),
)


def route_features(r: RouteRecord) -> dict[str, float | None]:
    """Per-route metrics used by the battery and the analyze report."""
    feats = dict(route_metrics(r))
    feats["parcels_per_stop_std"] = float(np.std(to_allocation(r).counts))
    try:
        feats["distance_km"] = route_distance_km(r)
    except DomainError:
        feats["distance_km"] = None
    try:
        feats["compactness"] = compactness(r)
    except DomainError:
        feats["compactness"] = None
    return feats


def correlation_battery(routes: Sequence[RouteRecord]) -> CorrelationReport:
    """Correlate entropy with lumpiness, compactness and distance, and volume with distance.

    Routes where either metric of a pair is undefined or infinite are left out
    of that pair only.
    """
    if len(routes) < 3:
        raise DomainError("correlation battery needs at least 3 routes")
    feats = [route_features(r) for r in routes]
    entries = []
    for mx, my in BATTERY_PAIRS:
        pairs = [
            (f[mx], f[my])
            for f in feats
            if f[mx] is not None and f[my] is not None and math.isfinite(f[mx]) and math.isfinite(f[my])
        ]
        if len(pairs) < 3:
            entries.append(CorrelationEntry(mx, my, None, None, None, None, len(pairs)))
            continue
        xs, ys = zip(*pairs)
        entries.append(correlate(mx, my, xs, ys))
    return CorrelationReport(tuple(entries))
