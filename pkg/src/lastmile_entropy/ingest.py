"""Route dataset ingestion, validation, geometry and dataset summaries.

Two interchangeable encodings are supported:

* JSON: ``{"schema_version": 1, "routes": [{"route_id", "city",
  "total_distance_km"?, "stops": [{"stop_id", "lat", "lon", "kind",
  "parcel_count"}]}]}``
* CSV, one row per stop, header
  ``route_id,city,stop_id,seq,lat,lon,kind,parcel_count,total_distance_km``

Pickup points come as CSV with header ``point_id,lat,lon``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .entropy import Allocation, profile
from .errors import DomainError, ParseError, ValidationError

SCHEMA_VERSION = 1
EARTH_RADIUS_KM = 6371.0

HOME, PICKUP, STATION = "home", "pickup", "station"
STOP_KINDS = (HOME, PICKUP, STATION)

CSV_COLUMNS = ("route_id", "city", "stop_id", "seq", "lat", "lon", "kind", "parcel_count", "total_distance_km")
POINT_COLUMNS = ("point_id", "lat", "lon")


@dataclass(frozen=True)
class StopRecord:
    stop_id: str
    lat: float
    lon: float
    kind: str = HOME
    parcel_count: int = 0

    @property
    def latlon(self) -> tuple[float, float]:
        return (self.lat, self.lon)


@dataclass(frozen=True)
class RouteRecord:
    route_id: str
    city: str
    stops: tuple[StopRecord, ...]
    total_distance_km: float | None = None

    @property
    def demand_stops(self) -> tuple[StopRecord, ...]:
        """Non-station stops, in delivery order."""
        return tuple(s for s in self.stops if s.kind != STATION)


@dataclass(frozen=True)
class PickupPoint:
    point_id: str
    lat: float
    lon: float


@dataclass(frozen=True)
class Rejection:
    route_id: str | None
    reason: str
    line: int | None = None
    field: str | None = None

    def as_dict(self) -> dict:
        return {"route_id": self.route_id, "line": self.line, "field": self.field, "reason": self.reason}


@dataclass
class ParseResult:
    routes: list[RouteRecord] = field(default_factory=list)
    rejections: list[Rejection] = field(default_factory=list)


class _Invalid(Exception):
    def __init__(self, reason: str, field: str | None = None):
        super().__init__(reason)
        self.reason = reason
        self.field = field


def _to_float(value, name: str) -> float:
    if isinstance(value, bool):
        raise _Invalid(f"{name} is not a number", name)
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise _Invalid(f"{name} is not a number: {value!r}", name) from None
    if not math.isfinite(out):
        raise _Invalid(f"{name} is not finite", name)
    return out


def _to_count(value) -> int:
    if isinstance(value, bool):
        raise _Invalid("parcel_count is not an integer", "parcel_count")
    try:
        f = float(value)
    except (TypeError, ValueError):
        raise _Invalid(f"parcel_count is not an integer: {value!r}", "parcel_count") from None
    if not f.is_integer():
        raise _Invalid(f"parcel_count is not an integer: {value!r}", "parcel_count")
    if f < 0:
        raise _Invalid("parcel_count is negative", "parcel_count")
    return int(f)


def _check_coords(lat: float, lon: float) -> None:
    if not -90.0 <= lat <= 90.0:
        raise _Invalid("latitude out of range", "lat")
    if not -180.0 <= lon <= 180.0:
        raise _Invalid("longitude out of range", "lon")


def _make_stop(stop_id, lat, lon, kind, parcel_count) -> StopRecord:
    if stop_id is None or str(stop_id) == "":
        raise _Invalid("missing stop_id", "stop_id")
    lat = _to_float(lat, "lat")
    lon = _to_float(lon, "lon")
    _check_coords(lat, lon)
    if kind not in STOP_KINDS:
        raise _Invalid(f"unknown stop kind {kind!r}", "kind")
    count = _to_count(parcel_count)
    if kind == STATION and count != 0:
        raise _Invalid("station stops must carry parcel_count 0", "parcel_count")
    return StopRecord(str(stop_id), lat, lon, kind, count)


def _distance_or_none(value) -> float | None:
    if value is None or value == "":
        return None
    d = _to_float(value, "total_distance_km")
    if d < 0:
        raise _Invalid("total_distance_km is negative", "total_distance_km")
    return d


def _check_route(stops: Sequence[StopRecord]) -> None:
    if not stops:
        raise _Invalid("route has no stops", "stops")
    if not any(s.kind != STATION for s in stops):
        raise _Invalid("route has no non-station stop", "stops")
    ids = [s.stop_id for s in stops]
    if len(set(ids)) != len(ids):
        raise _Invalid("duplicate stop_id within route", "stop_id")


def _parse_json(text: str) -> ParseResult:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {doc.get('schema_version')!r}", field="schema_version")
    routes = doc.get("routes")
    if not isinstance(routes, list):
        raise ParseError("'routes' must be a list", field="routes")

    result = ParseResult()
    seen: set[str] = set()
    for i, raw in enumerate(routes):
        route_id = raw.get("route_id") if isinstance(raw, dict) else None
        try:
            if not isinstance(raw, dict):
                raise _Invalid("route entry is not an object")
            if not route_id:
                raise _Invalid("missing route_id", "route_id")
            if route_id in seen:
                raise _Invalid("duplicate route_id", "route_id")
            raw_stops = raw.get("stops")
            if not isinstance(raw_stops, list):
                raise _Invalid("'stops' must be a list", "stops")
            stops = []
            for j, st in enumerate(raw_stops):
                if not isinstance(st, dict):
                    raise _Invalid(f"stops[{j}] is not an object", "stops")
                try:
                    stops.append(
                        _make_stop(st.get("stop_id"), st.get("lat"), st.get("lon"), st.get("kind"), st.get("parcel_count"))
                    )
                except _Invalid as exc:
                    raise _Invalid(f"stops[{j}]: {exc.reason}", f"stops[{j}].{exc.field}") from None
            _check_route(stops)
            route = RouteRecord(str(route_id), str(raw.get("city", "")), tuple(stops), _distance_or_none(raw.get("total_distance_km")))
        except _Invalid as exc:
            result.rejections.append(Rejection(route_id, exc.reason, None, f"routes[{i}].{exc.field}" if exc.field else f"routes[{i}]"))
            continue
        seen.add(route.route_id)
        result.routes.append(route)
    return result


def _parse_csv(text: str) -> ParseResult:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty CSV document", line=1) from None
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise ParseError(f"missing CSV columns: {', '.join(missing)}", line=1, field=missing[0])
    col = {name: header.index(name) for name in CSV_COLUMNS}

    # route_id -> list of (seq, line, stop), plus route-level attributes
    grouped: dict[str, dict] = {}
    bad: dict[str, list[Rejection]] = {}
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", line=line_no)
        rec = {name: row[idx] for name, idx in col.items()}
        route_id = rec["route_id"]
        if not route_id:
            bad.setdefault("", []).append(Rejection(None, "missing route_id", line_no, "route_id"))
            continue
        entry = grouped.setdefault(route_id, {"city": rec["city"], "distance": rec["total_distance_km"], "rows": []})
        try:
            if rec["city"] != entry["city"]:
                raise _Invalid("city differs between rows of the same route", "city")
            if rec["total_distance_km"] != entry["distance"]:
                raise _Invalid("total_distance_km differs between rows of the same route", "total_distance_km")
            try:
                seq = int(rec["seq"])
            except ValueError:
                raise _Invalid(f"seq is not an integer: {rec['seq']!r}", "seq") from None
            stop = _make_stop(rec["stop_id"], rec["lat"], rec["lon"], rec["kind"], rec["parcel_count"])
            entry["rows"].append((seq, line_no, stop))
        except _Invalid as exc:
            bad.setdefault(route_id, []).append(Rejection(route_id, exc.reason, line_no, exc.field))

    result = ParseResult()
    result.rejections.extend(bad.pop("", []))
    for route_id, entry in grouped.items():
        if route_id in bad:
            result.rejections.extend(bad[route_id])
            continue
        rows = sorted(entry["rows"], key=lambda r: r[0])
        seqs = [r[0] for r in rows]
        try:
            if len(set(seqs)) != len(seqs):
                raise _Invalid("duplicate seq within route", "seq")
            stops = tuple(r[2] for r in rows)
            _check_route(stops)
            distance = _distance_or_none(entry["distance"])
        except _Invalid as exc:
            line = rows[0][1] if rows else None
            result.rejections.append(Rejection(route_id, exc.reason, line, exc.field))
            continue
        result.routes.append(RouteRecord(route_id, entry["city"], stops, distance))
    return result


def parse_routes(document: str, fmt: str) -> ParseResult:
    """Parse a route document. Invalid routes are reported, never silently dropped."""
    if fmt == "json":
        return _parse_json(document)
    if fmt == "csv":
        return _parse_csv(document)
    raise ParseError(f"unknown dataset format {fmt!r}")


def detect_format(path: str | Path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".json":
        return "json"
    if suffix == ".csv":
        return "csv"
    raise ParseError(f"cannot infer dataset format from {str(path)!r}; use .json or .csv")


def load_routes(path: str | Path, strict: bool = True) -> ParseResult:
    """Read a dataset file. With ``strict``, any rejection raises ValidationError."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    result = parse_routes(text, detect_format(path))
    if strict and result.rejections:
        first = result.rejections[0]
        raise ValidationError(f"{len(result.rejections)} invalid record(s); first: {first.reason}")
    return result


def _num(x: float) -> str:
    return repr(float(x))


def dumps_routes_json(routes: Iterable[RouteRecord]) -> str:
    out = []
    for r in routes:
        entry = {"route_id": r.route_id, "city": r.city}
        if r.total_distance_km is not None:
            entry["total_distance_km"] = r.total_distance_km
        entry["stops"] = [
            {"stop_id": s.stop_id, "lat": s.lat, "lon": s.lon, "kind": s.kind, "parcel_count": s.parcel_count}
            for s in r.stops
        ]
        out.append(entry)
    return json.dumps({"schema_version": SCHEMA_VERSION, "routes": out}, indent=2) + "\n"


def dumps_routes_csv(routes: Iterable[RouteRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in routes:
        dist = "" if r.total_distance_km is None else _num(r.total_distance_km)
        for seq, s in enumerate(r.stops):
            writer.writerow([r.route_id, r.city, s.stop_id, seq, _num(s.lat), _num(s.lon), s.kind, s.parcel_count, dist])
    return buf.getvalue()


def load_pickup_points(path: str | Path) -> list[PickupPoint]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    return parse_pickup_points(text)


def parse_pickup_points(text: str) -> list[PickupPoint]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or any(c not in header for c in POINT_COLUMNS):
        raise ParseError("pickup point file needs header point_id,lat,lon", line=1)
    idx = {c: header.index(c) for c in POINT_COLUMNS}
    points, seen = [], set()
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", line=line_no)
        pid = row[idx["point_id"]]
        try:
            lat = _to_float(row[idx["lat"]], "lat")
            lon = _to_float(row[idx["lon"]], "lon")
            _check_coords(lat, lon)
        except _Invalid as exc:
            raise ValidationError(f"pickup point {pid!r} (line {line_no}): {exc.reason}") from None
        if not pid or pid in seen:
            raise ValidationError(f"missing or duplicate point_id on line {line_no}")
        seen.add(pid)
        points.append(PickupPoint(pid, lat, lon))
    return points


def dumps_pickup_points(points: Iterable[PickupPoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(POINT_COLUMNS)
    for p in points:
        writer.writerow([p.point_id, _num(p.lat), _num(p.lon)])
    return buf.getvalue()


# --- geometry ------------------------------------------------------------------


def haversine_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance between two (lat, lon) pairs in degrees."""
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def haversine_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise distances (km) between rows of two (n, 2) lat/lon arrays."""
    a = np.radians(np.asarray(a, dtype=float).reshape(-1, 2))
    b = np.radians(np.asarray(b, dtype=float).reshape(-1, 2))
    lat1, lon1 = a[:, :1], a[:, 1:]
    lat2, lon2 = b[:, 0][None, :], b[:, 1][None, :]
    h = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def route_distance_km(r: RouteRecord) -> float:
    """Recorded total distance if present, else the sum of consecutive haversine legs."""
    if r.total_distance_km is not None:
        return r.total_distance_km
    if len(r.stops) < 2:
        raise DomainError(f"route {r.route_id!r} needs two stops to measure a distance")
    return math.fsum(haversine_km(s.latlon, t.latlon) for s, t in zip(r.stops, r.stops[1:]))


def to_allocation(r: RouteRecord) -> Allocation:
    counts = tuple(s.parcel_count for s in r.demand_stops if s.parcel_count >= 1)
    if not counts:
        raise DomainError(f"route {r.route_id!r} carries no parcels")
    return Allocation(counts)


# --- summaries -----------------------------------------------------------------

SUMMARY_METRICS = ("N", "K", "N/K", "G", "G_norm", "H", "H_norm")


@dataclass(frozen=True)
class MetricStats:
    mean: float
    std: float
    min: float
    max: float
    count: int


@dataclass(frozen=True)
class DatasetSummary:
    """Per-metric aggregates over routes; std is the population standard deviation."""

    metrics: dict[str, MetricStats]
    route_count: int
    stop_count: int
    single_parcel_share: float
    over_five_share: float
    std_convention: str = "population"


def route_metrics(r: RouteRecord) -> dict[str, float | None]:
    a = to_allocation(r)
    p = profile(a)
    return {"N": a.n, "K": a.k, "N/K": a.n / a.k, "G": p.g, "G_norm": p.g_norm, "H": p.h, "H_norm": p.h_norm}


def _stats(values: Sequence[float]) -> MetricStats:
    arr = np.asarray(values, dtype=float)
    return MetricStats(float(arr.mean()), float(arr.std(ddof=0)), float(arr.min()), float(arr.max()), len(arr))


def summarize(routes: Sequence[RouteRecord]) -> DatasetSummary:
    """Aggregate route profiles. Undefined normalizations are left out of their metric."""
    if not routes:
        raise DomainError("cannot summarize an empty dataset")
    per_route = [route_metrics(r) for r in routes]
    metrics = {}
    for name in SUMMARY_METRICS:
        values = [m[name] for m in per_route if m[name] is not None]
        if values:
            metrics[name] = _stats(values)
    counts = [c for r in routes for c in to_allocation(r).counts]
    stops = len(counts)
    return DatasetSummary(
        metrics=metrics,
        route_count=len(routes),
        stop_count=stops,
        single_parcel_share=sum(1 for c in counts if c == 1) / stops,
        over_five_share=sum(1 for c in counts if c > 5) / stops,
    )
