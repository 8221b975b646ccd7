"""Structural entropy analytics for last-mile delivery networks."""

from __future__ import annotations

__version__ = "0.1.0"

from .entropy import (
    Allocation,
    EntropyProfile,
    Quadrant,
    QuadrantThresholds,
    classify_quadrant,
    log_factorial,
    profile,
    shannon_entropy,
    stirling_t1,
    stirling_t2,
    stirling_t3,
    stirling_table,
    structural_entropy,
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
from .system import (
    SystemState,
    TemporalScenario,
    chaining_spectrum,
    conservation_check,
    spatial_increase_check,
    temporal_entropy,
    total_entropy,
)
from .generalized import (
    ClassSpec,
    FailureModel,
    GeneralScenario,
    consistency_report,
    expected_attempts,
    general_total_entropy,
    linear_scaling_check,
    special_case_entropy,
)
from .ingest import PickupPoint, RouteRecord, StopRecord, load_routes, parse_routes, summarize, to_allocation
from .consolidation import AdoptionParams, SweepGrid, activation_probability, simulate, sweep
from .analytics import correlation_battery, fit_kappa, predict_distance

