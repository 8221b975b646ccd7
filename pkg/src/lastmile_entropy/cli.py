"""Command-line front end.

Exit codes: 0 success, 2 input/format error, 3 validation error,
4 computation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Any, Sequence

import jsonschema

from . import __version__
from .analytics import fit_kappa, route_features
from .consolidation import (
    DEFAULT_BETAS,
    DEFAULT_LAMBDAS,
    DEFAULT_THRESHOLDS,
    EXPECTATION,
    MONTE_CARLO,
    SWEEP_COLUMNS,
    SweepGrid,
    sweep,
)
from .entropy import (
    DEFAULT_STIRLING_NS,
    DEFAULT_STIRLING_P_BARS,
    EntropyProfile,
    QuadrantThresholds,
    classify_quadrant,
    stirling_table,
)
from .errors import (
    ClassificationError,
    ConfigError,
    DomainError,
    EntropyError,
    FitError,
    ParseError,
    PreconditionError,
    ValidationError,
)
from .generalized import (
    CASES,
    HOME_TERM_PER_STOP,
    HOME_TERMS,
    ClassSpec,
    FailureModel,
    GeneralScenario,
    consistency_report,
    general_total_entropy,
    linear_scaling_check,
)
from .ingest import load_pickup_points, load_routes, summarize, SUMMARY_METRICS

EXIT_OK, EXIT_INPUT, EXIT_VALIDATION, EXIT_COMPUTE = 0, 2, 3, 4

FORMATS = ("csv", "json", "md-table")


class CommandError(Exception):
    def __init__(self, message: str, code: int, details: Any = None):
        super().__init__(message)
        self.code = code
        self.details = details


# --- rendering -------------------------------------------------------------------


def _fmt(value: Any, digits: int = 10) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.{digits}g}"
    return str(value)


def _json_value(value: Any) -> Any:
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def render_csv(columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    return buf.getvalue()


def render_md(columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    lines = ["| " + " | ".join(columns) + " |", "|" + "|".join("---" for _ in columns) + "|"]
    for row in rows:
        cells = [v if isinstance(v, str) else _fmt(v) for v in row]
        lines.append("| " + " | ".join(c if c != "" else "n/a" for c in cells) + " |")
    return "\n".join(lines) + "\n"


def render_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _records(columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> list[dict]:
    return [{c: _json_value(v) for c, v in zip(columns, row)} for row in rows]


def render_sections(fmt: str, sections: Sequence[tuple[str, Sequence[str], Sequence[Sequence[Any]]]]) -> str:
    """Render named tables: CSV sections start with a '# name' line, Markdown with a heading."""
    if fmt == "json":
        return render_json({name: _records(cols, rows) for name, cols, rows in sections})
    parts = []
    for name, cols, rows in sections:
        if fmt == "csv":
            parts.append(f"# {name}\n" + render_csv(cols, rows))
        else:
            parts.append(f"### {name}\n\n" + render_md(cols, rows))
    return "\n".join(parts)


def write_output(text: str, output: str | None) -> None:
    """Write to stdout, or atomically to ``output`` (temp file then rename)."""
    if output is None:
        sys.stdout.write(text)
        return
    target = Path(output)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _pct(v: float) -> str:
    """Signed percentage with two significant digits, at least one decimal place."""
    if v == 0:
        return "+0.0%"
    decimals = max(1, 1 - int(math.floor(math.log10(abs(v)))))
    return f"{v:+.{decimals}f}%"


# --- dataset loading -------------------------------------------------------------


def _load_dataset(path: str, skip_invalid: bool):
    result = load_routes(path, strict=False)
    if result.rejections and not skip_invalid:
        raise CommandError(
            f"{len(result.rejections)} invalid record(s) in {path}; first: {result.rejections[0].reason}",
            EXIT_VALIDATION,
            [r.as_dict() for r in result.rejections],
        )
    if not result.routes:
        raise CommandError(f"no valid routes in {path}", EXIT_VALIDATION, [r.as_dict() for r in result.rejections])
    return result


# --- commands --------------------------------------------------------------------

ANALYZE_COLUMNS = (
    "route_id",
    "N",
    "K",
    "N/K",
    "G",
    "G_norm",
    "H",
    "H_norm",
    "quadrant",
    "distance_km",
    "compactness",
)


def cmd_analyze(args) -> str:
    result = _load_dataset(args.dataset, args.skip_invalid)
    th = QuadrantThresholds(args.g_threshold, args.h_threshold)
    rows = []
    for r in result.routes:
        f = route_features(r)
        prof = EntropyProfile(f["G"], f["G_norm"], f["H"], f["H_norm"], f["N"], f["K"])
        try:
            quadrant = str(classify_quadrant(prof, th))
        except ClassificationError:
            quadrant = None
        rows.append([r.route_id, f["N"], f["K"], f["N/K"], f["G"], f["G_norm"], f["H"], f["H_norm"], quadrant, f["distance_km"], f["compactness"]])

    summary = summarize(result.routes)
    stat_cols = ("metric", "mean", "std", "min", "max", "count")
    stat_rows = [
        [name, m.mean, m.std, m.min, m.max, m.count]
        for name in SUMMARY_METRICS
        if (m := summary.metrics.get(name)) is not None
    ]
    share_cols = ("key", "value")
    share_rows = [
        ["route_count", summary.route_count],
        ["stop_count", summary.stop_count],
        ["single_parcel_share", summary.single_parcel_share],
        ["over_five_share", summary.over_five_share],
        ["std_convention", summary.std_convention],
        ["rejected_records", len(result.rejections)],
    ]
    if args.format == "json":
        return render_json(
            {
                "routes": _records(ANALYZE_COLUMNS, rows),
                "summary": {
                    **{k: v for k, v in share_rows},
                    "metrics": {r[0]: dict(zip(stat_cols[1:], r[1:])) for r in stat_rows},
                },
                "rejections": [x.as_dict() for x in result.rejections],
            }
        )
    return render_sections(args.format, [("routes", ANALYZE_COLUMNS, rows), ("summary", stat_cols, stat_rows), ("dataset", share_cols, share_rows)])


STIRLING_COLUMNS = ("N", "p_bar", "K", "G_exact", "err_T1", "err_T2", "err_T3", "flags")


def cmd_stirling(args) -> str:
    try:
        table = stirling_table(args.n, args.p_bar)
    except DomainError as exc:
        raise CommandError(str(exc), EXIT_INPUT) from None
    if args.format == "json":
        return render_json(
            [
                {
                    "N": r.n,
                    "p_bar": r.p_bar,
                    "K": r.k,
                    "G_exact": r.g_exact,
                    "err_T1": r.err_t1,
                    "err_T2": r.err_t2,
                    "err_T3": r.err_t3,
                    "divisible": r.divisible,
                    "flags": list(r.flags),
                }
                for r in table
            ]
        )
    rows = [
        [str(r.n), f"{r.p_bar:g}", str(r.k), f"{r.g_exact:.2f}", _pct(r.err_t1), _pct(r.err_t2), _pct(r.err_t3), ";".join(r.flags)]
        for r in table
    ]
    if args.format == "csv":
        return render_csv(STIRLING_COLUMNS, rows)
    body = render_md(STIRLING_COLUMNS[:-1] + ("note",), [row[:-1] + [""] for row in rows])
    notes, lines = {}, body.splitlines()
    for i, r in enumerate(table):
        if r.flags:
            key = ";".join(r.flags)
            notes.setdefault(key, len(notes) + 1)
            lines[i + 2] = lines[i + 2][: -len("n/a |")] + f"[{notes[key]}] |"
    foot = [f"[{n}] {key}" for key, n in notes.items()]
    return "\n".join(lines) + "\n" + ("\n" + "\n".join(foot) + "\n" if foot else "")


def _mode(args) -> tuple[str, int | None]:
    mode = MONTE_CARLO if args.mode == "mc" else EXPECTATION
    if mode == MONTE_CARLO and args.seed is None:
        raise CommandError("--mode mc requires --seed", EXIT_INPUT)
    return mode, args.seed


def cmd_consolidate(args) -> str:
    if not args.points:
        raise CommandError("consolidate needs --points FILE", EXIT_INPUT)
    mode, seed = _mode(args)
    result = _load_dataset(args.dataset, args.skip_invalid)
    points = load_pickup_points(args.points)
    grid = SweepGrid(tuple(args.t), tuple(args.beta), tuple(args.lambda_))
    results = sweep(result.routes, points, grid, mode, seed)
    pct = {"activated", "adopters", "parcels_consolidated"}
    rows = []
    for res in results:
        row = res.row()
        rows.append([100.0 * row[c] if c in pct else row[c] for c in SWEEP_COLUMNS])
    if args.format == "json":
        return render_json(
            {
                "mode": results[0].mode,
                "baseline_g_norm": results[0].baseline_g_norm,
                "percent_columns": sorted(pct | {"reduction"}),
                "rows": _records(SWEEP_COLUMNS, rows),
            }
        )
    if args.format == "csv":
        return render_csv(SWEEP_COLUMNS, rows)
    return f"mode: {results[0].mode}; baseline g_norm: {_fmt(results[0].baseline_g_norm)}\n\n" + render_md(SWEEP_COLUMNS, rows)


FIT_COLUMNS = ("scope", "kappa", "r_squared", "n_points", "residual_std", "excluded_points", "note")


def _fit_rows(scope: str, routes, required: int, strict: bool) -> list:
    points, unmeasured = [], 0
    for r in routes:
        f = route_features(r)
        if f["distance_km"] is None or f["G_norm"] is None:
            unmeasured += 1
            continue
        points.append((f["G_norm"], f["distance_km"]))
    try:
        fit = fit_kappa(points)
        if fit.n_points < required:
            raise FitError(f"{fit.n_points} usable point(s); at least {required} required")
    except FitError as exc:
        if strict:
            raise CommandError(f"{scope}: {exc}", EXIT_COMPUTE) from None
        return [scope, None, None, 0, None, len(points) + unmeasured, str(exc)]
    return [scope, fit.kappa, fit.r_squared, fit.n_points, fit.residual_std, fit.excluded_points + unmeasured, ""]


def cmd_fit_kappa(args) -> str:
    result = _load_dataset(args.dataset, args.skip_invalid)
    rows = [_fit_rows("all", result.routes, 2, strict=True)]
    if args.by_city:
        cities = sorted({r.city for r in result.routes})
        for city in cities:
            rows.append(_fit_rows(city, [r for r in result.routes if r.city == city], 2, strict=False))
    if args.format == "json":
        return render_json(_records(FIT_COLUMNS, rows))
    if args.format == "csv":
        return render_csv(FIT_COLUMNS, rows)
    return render_md(FIT_COLUMNS, rows)


SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "scenarios"],
    "properties": {
        "schema_version": {"const": 1},
        "scenarios": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "case", "classes"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "case": {"enum": list(CASES)},
                    "alpha": {"type": "number", "minimum": 0, "maximum": 1},
                    "lambda_cap": {"type": "integer", "minimum": 1},
                    "n_points": {"type": "integer", "minimum": 0},
                    "c_pickup": {"type": "number", "minimum": 0},
                    "multipliers": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                    "classes": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "required": ["n_parcels"],
                            "additionalProperties": False,
                            "properties": {
                                "n_parcels": {"type": "number", "minimum": 0},
                                "eta": {"type": "number", "minimum": 0, "maximum": 1},
                                "eligible_points": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                                "pickup_allocation": {"type": "array", "items": {"type": "number", "minimum": 0}},
                                "home_parcels_per_stop": {"type": "number", "minimum": 1},
                            },
                        },
                    },
                },
            },
        },
    },
}


def load_scenarios(path: str) -> list[tuple[str, str, GeneralScenario, tuple[int, ...]]]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CommandError(f"cannot read {path}: {exc.strerror}", EXIT_INPUT) from None
    except json.JSONDecodeError as exc:
        raise CommandError(f"invalid JSON in {path}: {exc.msg} (line {exc.lineno})", EXIT_INPUT) from None
    validator = jsonschema.Draft7Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise CommandError(f"schema violation at {where}: {err.message}", EXIT_INPUT, [
            {"path": "/".join(str(p) for p in e.absolute_path), "message": e.message} for e in errors
        ])
    out = []
    for i, sc in enumerate(doc["scenarios"]):
        try:
            scenario = GeneralScenario(
                classes=tuple(
                    ClassSpec(
                        n_parcels=c["n_parcels"],
                        eta=c.get("eta", 1.0),
                        eligible_points=tuple(c.get("eligible_points", ())),
                        pickup_allocation=tuple(c.get("pickup_allocation", ())),
                        home_parcels_per_stop=c.get("home_parcels_per_stop", 1.0),
                    )
                    for c in sc["classes"]
                ),
                failure=FailureModel(sc.get("alpha", 0.0), sc.get("lambda_cap", 1)),
                n_points=sc.get("n_points", 0),
                c_pickup=sc.get("c_pickup", 0),
            )
        except DomainError as exc:
            raise CommandError(f"scenario at scenarios/{i} ({sc['name']}): {exc}", EXIT_VALIDATION) from None
        out.append((sc["name"], sc["case"], scenario, tuple(sc.get("multipliers", (1, 2, 4, 8)))))
    return out


def cmd_scenarios(args) -> str:
    scenarios = load_scenarios(args.scenario_file)
    sections, doc = [], []
    for name, case, scenario, multipliers in scenarios:
        g = general_total_entropy(scenario, args.home_term)
        try:
            rows = consistency_report([(case, scenario)], args.home_term)
        except PreconditionError as exc:
            raise CommandError(f"scenario {name!r}: {exc}", EXIT_VALIDATION) from None
        scaling = linear_scaling_check(scenario, multipliers, args.home_term)
        entropy_rows = [["delivery", g.delivery], ["pickup", g.pickup], ["total", g.total]]
        cons_rows = [[r.case, r.variant, r.general, r.special, r.gap, r.flagged] for r in rows]
        scale_rows = [
            [m, n, tot, dev] for m, n, tot, dev in zip(scaling.multipliers, scaling.n_values, scaling.totals, scaling.deviations)
        ]
        scale_summary = [
            ["slope", scaling.slope],
            ["leading_slope", scaling.leading_slope],
            ["nlogn_coefficient", scaling.nlogn_coefficient],
            ["max_deviation", scaling.max_deviation],
            ["linear", scaling.linear],
            ["converging", scaling.converging],
        ]
        doc.append(
            {
                "name": name,
                "case": case,
                "home_term": args.home_term,
                "general": dict(entropy_rows),
                "consistency": _records(("case", "variant", "general", "special", "gap", "flagged"), cons_rows),
                "scaling": {
                    "rows": _records(("multiplier", "n", "total", "deviation"), scale_rows),
                    **dict(scale_summary),
                },
            }
        )
        sections += [
            (f"{name}: general entropy ({args.home_term})", ("component", "nats"), entropy_rows),
            (f"{name}: consistency", ("case", "variant", "general", "special", "gap", "flagged"), cons_rows),
            (f"{name}: scaling", ("multiplier", "n", "total", "deviation"), scale_rows),
            (f"{name}: scaling summary", ("key", "value"), scale_summary),
        ]
    if args.format == "json":
        return render_json(doc)
    return render_sections(args.format, sections)


# --- entry point -----------------------------------------------------------------


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=FORMATS + ("md",), default="csv", help="output encoding (default csv)")
    common.add_argument("--output", "-o", help="write to this file instead of stdout")
    common.add_argument("--seed", type=int, help="random seed (required for --mode mc)")
    common.add_argument("--mode", choices=("expectation", "mc"), default="expectation")
    common.add_argument("--error-report", help="write a JSON error report here on failure")

    parser = argparse.ArgumentParser(prog="lastmile-entropy", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="per-route entropy profiles and dataset summary")
    p.add_argument("dataset")
    p.add_argument("--g-threshold", type=float, default=0.5)
    p.add_argument("--h-threshold", type=float, default=0.5)
    p.add_argument("--skip-invalid", action="store_true", help="continue past rejected records")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("stirling", parents=[common], help="exact entropy vs Stirling approximations")
    p.add_argument("--n", type=_ints, default=list(DEFAULT_STIRLING_NS), help="comma-separated N values")
    p.add_argument("--p-bar", type=_floats, default=list(DEFAULT_STIRLING_P_BARS), help="comma-separated mean parcels per stop")
    p.set_defaults(func=cmd_stirling)

    p = sub.add_parser("consolidate", parents=[common], help="pickup-point adoption sweep")
    p.add_argument("dataset")
    p.add_argument("--points", help="pickup points CSV (point_id,lat,lon)")
    p.add_argument("--t", type=_floats, default=list(DEFAULT_THRESHOLDS), help="activation thresholds in km")
    p.add_argument("--beta", type=_floats, default=list(DEFAULT_BETAS))
    p.add_argument("--lambda", dest="lambda_", type=_floats, default=list(DEFAULT_LAMBDAS))
    p.add_argument("--skip-invalid", action="store_true")
    p.set_defaults(func=cmd_consolidate)

    p = sub.add_parser("fit-kappa", parents=[common], help="fit d = kappa * G_norm / (1 - G_norm)")
    p.add_argument("dataset")
    p.add_argument("--by-city", action="store_true", help="add one fit per city")
    p.add_argument("--skip-invalid", action="store_true")
    p.set_defaults(func=cmd_fit_kappa)

    p = sub.add_parser("scenarios", parents=[common], help="generalized entropy scenarios")
    p.add_argument("scenario_file")
    p.add_argument("--home-term", choices=HOME_TERMS, default=HOME_TERM_PER_STOP)
    p.set_defaults(func=cmd_scenarios)
    return parser


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, CommandError):
        return exc.code
    if isinstance(exc, (ParseError, ConfigError)):
        return EXIT_INPUT
    if isinstance(exc, ValidationError):
        return EXIT_VALIDATION
    return EXIT_COMPUTE


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format == "md":
        args.format = "md-table"
    try:
        text = args.func(args)
        write_output(text, args.output)
    except (CommandError, EntropyError) as exc:
        code = _exit_code(exc)
        print(f"error: {exc}", file=sys.stderr)
        if args.error_report:
            report = {"exit_code": code, "error": str(exc), "type": type(exc).__name__}
            details = getattr(exc, "details", None)
            if details is not None:
                report["details"] = details
            write_output(render_json(report), args.error_report)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
