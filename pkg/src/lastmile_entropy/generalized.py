"""Generalized system entropy under delivery heterogeneity.

Parcels fall into classes. Each class sends a share ``eta`` of its parcels to
home delivery (with up to ``lambda_cap`` attempts, each failing with
probability ``alpha``) and the rest straight to eligible pickup points. Counts
are expectations, so factorials of non-integers go through ln Gamma.

The general evaluator and the closed-form special cases are kept separate on
purpose: the closed forms do not all reduce to the general expression, and
``consistency_report`` measures the gaps instead of hiding them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .entropy import log_factorial
from .errors import DomainError, PreconditionError

# How successfully home-delivered parcels are grouped on the carrier side.
# "per_stop": each home stop holds `home_parcels_per_stop` parcels and
#     contributes ln(q!) per stop, as in the home-delivery term of the
#     carrier-side multinomial (0 for one parcel per stop).
# "lumped": the printed -ln(h_r!) term, i.e. all home deliveries of a class
#     treated as one occupancy group.
HOME_TERM_PER_STOP = "per_stop"
HOME_TERM_LUMPED = "lumped"
HOME_TERMS = (HOME_TERM_PER_STOP, HOME_TERM_LUMPED)

# Allowed mismatch between a class's pickup allocation and f_r + N_r^pickup.
ALLOCATION_TOL = 0.5
GAP_FLAG_TOL = 1e-6


@dataclass(frozen=True)
class FailureModel:
    alpha: float = 0.0
    lambda_cap: int = 1

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in [0, 1], got {self.alpha}")
        if int(self.lambda_cap) != self.lambda_cap or self.lambda_cap < 1:
            raise DomainError(f"lambda_cap must be an integer >= 1, got {self.lambda_cap}")
        object.__setattr__(self, "lambda_cap", int(self.lambda_cap))

    @property
    def final_failure(self) -> float:
        """Probability that all attempts fail, alpha ** lambda_cap."""
        return self.alpha**self.lambda_cap


@dataclass(frozen=True)
class AttemptDistribution:
    """Law of the attempt count tau on 1..lambda_cap."""

    probabilities: tuple[float, ...]

    @property
    def mean(self) -> float:
        return math.fsum(j * p for j, p in enumerate(self.probabilities, start=1))

    @property
    def expected_log_factorial(self) -> float:
        return math.fsum(p * log_factorial(j) for j, p in enumerate(self.probabilities, start=1))


def expected_attempts(f: FailureModel) -> float:
    """(1 - alpha^L) / (1 - alpha), with the limit L at alpha = 1."""
    if f.alpha == 1.0:
        return float(f.lambda_cap)
    return (1.0 - f.final_failure) / (1.0 - f.alpha)


def attempt_distribution(f: FailureModel) -> AttemptDistribution:
    """Truncated geometric: attempt j happens iff the previous j - 1 failed."""
    a, cap = f.alpha, f.lambda_cap
    probs = [(1.0 - a) * a ** (j - 1) for j in range(1, cap)]
    probs.append(a ** (cap - 1))
    return AttemptDistribution(tuple(probs))


def expected_log_factorial_attempts(f: FailureModel) -> float:
    return attempt_distribution(f).expected_log_factorial


@dataclass(frozen=True)
class ClassSpec:
    """One parcel class. ``pickup_allocation[i]`` goes to ``eligible_points[i]``."""

    n_parcels: float
    eta: float = 1.0
    eligible_points: tuple[int, ...] = ()
    pickup_allocation: tuple[float, ...] = ()
    home_parcels_per_stop: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "eligible_points", tuple(int(k) for k in self.eligible_points))
        object.__setattr__(self, "pickup_allocation", tuple(float(p) for p in self.pickup_allocation))
        if self.n_parcels < 0:
            raise DomainError(f"n_parcels must be >= 0, got {self.n_parcels}")
        if not 0.0 <= self.eta <= 1.0:
            raise DomainError(f"eta must lie in [0, 1], got {self.eta}")
        if len(self.eligible_points) != len(self.pickup_allocation):
            raise DomainError("pickup_allocation must have one entry per eligible point")
        if len(set(self.eligible_points)) != len(self.eligible_points):
            raise DomainError("eligible_points contains duplicates")
        if any(p < 0 for p in self.pickup_allocation):
            raise DomainError("pickup allocations must be non-negative")
        if self.home_parcels_per_stop < 1:
            raise DomainError("home_parcels_per_stop must be >= 1")

    @property
    def n_home(self) -> float:
        return self.eta * self.n_parcels

    @property
    def n_pickup(self) -> float:
        return (1.0 - self.eta) * self.n_parcels

    def successes(self, f: FailureModel) -> float:
        """h_r: parcels delivered at home within the attempt cap."""
        return (1.0 - f.final_failure) * self.n_home

    def failures(self, f: FailureModel) -> float:
        """f_r: home parcels rerouted to pickup after the last failed attempt."""
        return f.final_failure * self.n_home

    def scaled(self, m: float) -> "ClassSpec":
        return replace(
            self,
            n_parcels=self.n_parcels * m,
            pickup_allocation=tuple(p * m for p in self.pickup_allocation),
        )


@dataclass(frozen=True)
class GeneralScenario:
    classes: tuple[ClassSpec, ...]
    failure: FailureModel = field(default_factory=FailureModel)
    n_points: int = 0
    c_pickup: float = 0

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if not self.classes:
            raise DomainError("a scenario needs at least one class")
        if self.c_pickup < 0:
            raise DomainError("c_pickup must be >= 0")
        for r, cls in enumerate(self.classes):
            bad = [k for k in cls.eligible_points if not 0 <= k < self.n_points]
            if bad:
                raise DomainError(f"class {r}: eligible points {bad} outside 0..{self.n_points - 1}")
            target = cls.failures(self.failure) + cls.n_pickup
            got = math.fsum(cls.pickup_allocation)
            if abs(got - target) > ALLOCATION_TOL:
                raise DomainError(
                    f"class {r}: pickup allocation sums to {got:g}, expected f_r + N_r^pickup = {target:g}"
                )

    @property
    def n(self) -> float:
        return math.fsum(c.n_parcels for c in self.classes)

    def point_loads(self) -> tuple[float, ...]:
        """p_k summed over classes."""
        loads = [0.0] * self.n_points
        for cls in self.classes:
            for k, p in zip(cls.eligible_points, cls.pickup_allocation):
                loads[k] += p
        return tuple(loads)

    def scaled(self, m: float) -> "GeneralScenario":
        return replace(
            self,
            classes=tuple(c.scaled(m) for c in self.classes),
            c_pickup=self.c_pickup * m,
        )


class GeneralEntropy(NamedTuple):
    delivery: float
    pickup: float
    total: float


def _factorial_terms(s: GeneralScenario, home_term: str) -> tuple[list[tuple[float, float]], float]:
    """Decompose the general entropy into sum(weight * ln(arg!)) + linear part.

    Every factorial argument is proportional to the scenario size; terms whose
    argument stays fixed under scaling are folded into the linear part.
    The last term is always the collection side, ln(C_pickup!).
    """
    if home_term not in HOME_TERMS:
        raise DomainError(f"unknown home_term {home_term!r}; expected one of {HOME_TERMS}")
    f = s.failure
    e_tau = expected_attempts(f)
    e_log_tau = expected_log_factorial_attempts(f)
    terms: list[tuple[float, float]] = []
    linear = 0.0
    for cls in s.classes:
        n_home = cls.n_home
        terms.append((1.0, n_home * e_tau))
        linear -= n_home * e_log_tau
        h = cls.successes(f)
        if home_term == HOME_TERM_LUMPED:
            terms.append((-1.0, h))
        else:
            q = cls.home_parcels_per_stop
            linear -= (h / q) * log_factorial(q)
        terms.extend((-1.0, p) for p in cls.pickup_allocation)
    terms.append((1.0, float(s.c_pickup)))
    return terms, linear


def general_total_entropy(s: GeneralScenario, home_term: str = HOME_TERM_PER_STOP) -> GeneralEntropy:
    terms, linear = _factorial_terms(s, home_term)
    *delivery_terms, pickup_term = terms
    delivery = math.fsum(w * log_factorial(x) for w, x in delivery_terms) + linear
    pickup = log_factorial(pickup_term[1])
    return GeneralEntropy(delivery, pickup, delivery + pickup)


# --- closed-form special cases ---------------------------------------------

BASELINE = "baseline"
SINGLE_ATTEMPT_FAILURE = "single_attempt_failure"
MULTIPLE_ATTEMPT_FAILURE = "multiple_attempt_failure"
DIRECT_TO_PICKUP = "direct_to_pickup"
SINGLE_ATTEMPT_MIXED = "single_attempt_mixed"
FULLY_HETEROGENEOUS = "fully_heterogeneous"
CASES = (
    BASELINE,
    SINGLE_ATTEMPT_FAILURE,
    MULTIPLE_ATTEMPT_FAILURE,
    DIRECT_TO_PICKUP,
    SINGLE_ATTEMPT_MIXED,
    FULLY_HETEROGENEOUS,
)

# Readings of the attempt-permutation term in the multiple-attempt closed form.
ATTEMPTS_AS_PRINTED = "as_printed"  # - E[ln tau!]
ATTEMPTS_PER_PARCEL = "per_parcel"  # - N * E[ln tau!]


def _need(params: Mapping, *keys: str) -> list:
    missing = [k for k in keys if k not in params]
    if missing:
        raise PreconditionError(f"missing parameters: {', '.join(missing)}")
    return [params[k] for k in keys]


def _baseline(params: Mapping) -> float:
    (n,) = _need(params, "n")
    return log_factorial(n)


def _single_attempt_failure(params: Mapping) -> float:
    n, alpha, k, c_pickup = _need(params, "n", "alpha", "n_points", "c_pickup")
    if not 0.0 <= alpha <= 1.0 or k < 1:
        raise PreconditionError("single-attempt failure needs alpha in [0, 1] and K >= 1")
    return (
        log_factorial(n * (1.0 + alpha))
        - 2 * k * log_factorial(alpha * n / k)
        + log_factorial(c_pickup)
    )


def _multiple_attempt_failure(params: Mapping) -> float:
    n, alpha, cap, k, c_pickup = _need(params, "n", "alpha", "lambda_cap", "n_points", "c_pickup")
    reading = params.get("attempts_term", ATTEMPTS_AS_PRINTED)
    f = FailureModel(alpha, cap)
    if f.lambda_cap < 2 or k < 1:
        raise PreconditionError("multiple-attempt failure needs lambda_cap >= 2 and K >= 1")
    e_log_tau = expected_log_factorial_attempts(f)
    if reading == ATTEMPTS_PER_PARCEL:
        e_log_tau *= n
    elif reading != ATTEMPTS_AS_PRINTED:
        raise PreconditionError(f"unknown attempts_term {reading!r}")
    return (
        log_factorial(n * expected_attempts(f))
        - e_log_tau
        - 2 * k * log_factorial(n * f.final_failure / k)
        + log_factorial(c_pickup)
    )


def _direct_to_pickup(params: Mapping) -> float:
    classes, c_total = _need(params, "classes", "c_total")
    out = []
    for c in classes:
        n_r, alloc = _need(c, "n_parcels", "pickup_allocation")
        out.append(log_factorial(n_r) - math.fsum(log_factorial(p) for p in alloc))
    return math.fsum(out) + log_factorial(c_total)


def _single_attempt_mixed(params: Mapping) -> float:
    classes, c_pickup = _need(params, "classes", "c_pickup")
    out = []
    for c in classes:
        n_r, h_r, alloc = _need(c, "n_parcels", "h", "pickup_allocation")
        out.append(log_factorial(n_r) - log_factorial(h_r) - math.fsum(log_factorial(p) for p in alloc))
    return math.fsum(out) + log_factorial(c_pickup)


def _fully_heterogeneous(params: Mapping) -> float:
    (scenario,) = _need(params, "scenario")
    return general_total_entropy(scenario, params.get("home_term", HOME_TERM_PER_STOP)).total


_EVALUATORS = {
    BASELINE: _baseline,
    SINGLE_ATTEMPT_FAILURE: _single_attempt_failure,
    MULTIPLE_ATTEMPT_FAILURE: _multiple_attempt_failure,
    DIRECT_TO_PICKUP: _direct_to_pickup,
    SINGLE_ATTEMPT_MIXED: _single_attempt_mixed,
    FULLY_HETEROGENEOUS: _fully_heterogeneous,
}


def special_case_entropy(case_id: str, params: Mapping) -> float:
    """Evaluate one of the closed-form special cases exactly as written.

    Parameters per case:

    * ``baseline``: n
    * ``single_attempt_failure``: n, alpha, n_points, c_pickup
    * ``multiple_attempt_failure``: n, alpha, lambda_cap, n_points, c_pickup,
      optional attempts_term ("as_printed" or "per_parcel")
    * ``direct_to_pickup``: classes [{n_parcels, pickup_allocation}], c_total
    * ``single_attempt_mixed``: classes [{n_parcels, h, pickup_allocation}], c_pickup
    * ``fully_heterogeneous``: scenario (a GeneralScenario), optional home_term
    """
    try:
        evaluator = _EVALUATORS[case_id]
    except KeyError:
        raise PreconditionError(f"unknown case {case_id!r}; expected one of {CASES}") from None
    return evaluator(params)


def _close(a: float, b: float, tol: float = 1e-9) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def special_case_params(case_id: str, s: GeneralScenario) -> dict:
    """Map a scenario onto a closed form's parameters, checking it is in that regime."""
    f = s.failure
    classes = s.classes
    if case_id == BASELINE:
        if f.alpha != 0.0 or any(c.eta != 1.0 for c in classes) or s.c_pickup != 0:
            raise PreconditionError("baseline needs alpha = 0, eta = 1 for every class and c_pickup = 0")
        return {"n": s.n}
    if case_id == SINGLE_ATTEMPT_FAILURE:
        if f.lambda_cap != 1 or any(c.eta != 1.0 for c in classes):
            raise PreconditionError("single-attempt failure needs lambda_cap = 1 and eta = 1")
        _require_symmetric(s)
        return {"n": s.n, "alpha": f.alpha, "n_points": s.n_points, "c_pickup": s.c_pickup}
    if case_id == MULTIPLE_ATTEMPT_FAILURE:
        if f.lambda_cap < 2 or any(c.eta != 1.0 for c in classes):
            raise PreconditionError("multiple-attempt failure needs lambda_cap >= 2 and eta = 1")
        if any(len(c.eligible_points) != s.n_points for c in classes):
            raise PreconditionError("multiple-attempt failure needs every point eligible for every class")
        _require_symmetric(s)
        return {
            "n": s.n,
            "alpha": f.alpha,
            "lambda_cap": f.lambda_cap,
            "n_points": s.n_points,
            "c_pickup": s.c_pickup,
        }
    if case_id == DIRECT_TO_PICKUP:
        if any(c.eta != 0.0 for c in classes):
            raise PreconditionError("direct-to-pickup needs eta = 0 for every class")
        return {
            "classes": [{"n_parcels": c.n_parcels, "pickup_allocation": c.pickup_allocation} for c in classes],
            "c_total": s.c_pickup,
        }
    if case_id == SINGLE_ATTEMPT_MIXED:
        if f.lambda_cap != 1 or any(not 0.0 < c.eta <= 1.0 for c in classes):
            raise PreconditionError("single-attempt mixed needs lambda_cap = 1 and eta in (0, 1]")
        return {
            "classes": [
                {"n_parcels": c.n_parcels, "h": c.successes(f), "pickup_allocation": c.pickup_allocation}
                for c in classes
            ],
            "c_pickup": s.c_pickup,
        }
    if case_id == FULLY_HETEROGENEOUS:
        return {"scenario": s}
    raise PreconditionError(f"unknown case {case_id!r}; expected one of {CASES}")


def _require_symmetric(s: GeneralScenario) -> None:
    loads = [p for p in s.point_loads()]
    if s.n_points < 1 or not all(_close(p, loads[0]) for p in loads):
        raise PreconditionError(f"closed form assumes equal loads on all K points, got {loads}")


@dataclass(frozen=True)
class ConsistencyRow:
    case: str
    variant: str
    general: float
    special: float
    gap: float
    flagged: bool


def consistency_report(
    cells: Iterable[tuple[str, GeneralScenario]],
    home_term: str = HOME_TERM_PER_STOP,
) -> list[ConsistencyRow]:
    """Compare the general evaluator with each cell's closed form; gap = special - general.

    Multiple-attempt cells produce one row per reading of the attempt term.
    """
    rows = []
    for case_id, s in cells:
        general = general_total_entropy(s, home_term).total
        params = special_case_params(case_id, s)
        variants: list[tuple[str, dict]] = [("", params)]
        if case_id == MULTIPLE_ATTEMPT_FAILURE:
            variants = [(r, {**params, "attempts_term": r}) for r in (ATTEMPTS_AS_PRINTED, ATTEMPTS_PER_PARCEL)]
        elif case_id == FULLY_HETEROGENEOUS:
            variants = [("", {**params, "home_term": home_term})]
        for variant, p in variants:
            special = special_case_entropy(case_id, p)
            gap = special - general
            rows.append(ConsistencyRow(case_id, variant, general, special, gap, abs(gap) > GAP_FLAG_TOL))
    return rows


# --- scaling -----------------------------------------------------------------


@dataclass(frozen=True)
class ScalingReport:
    """Behaviour of the total entropy when every count is multiplied by m.

    Writing each ln(x!) as x ln x - x leaves a leading form
    ``nlogn_coefficient * N ln N + leading_slope * N``. The coefficient is
    zero exactly when the factorial arguments balance, in which case growth is
    linear. ``deviations`` holds |G - leading form| / N per multiplier, the
    per-parcel size of the logarithmic remainder.
    """

    multipliers: tuple[int, ...]
    n_values: tuple[float, ...]
    totals: tuple[float, ...]
    slope: float
    leading_slope: float
    nlogn_coefficient: float
    deviations: tuple[float, ...]
    max_deviation: float

    @property
    def linear(self) -> bool:
        return abs(self.nlogn_coefficient) <= 1e-9

    @property
    def converging(self) -> bool:
        return self.deviations[-1] <= self.deviations[0]


def _xlogx(x: float) -> float:
    return x * math.log(x) if x > 0 else 0.0


def linear_scaling_check(
    s: GeneralScenario,
    multipliers: Sequence[int] = (1, 2, 4, 8),
    home_term: str = HOME_TERM_PER_STOP,
) -> ScalingReport:
    ms = []
    for m in multipliers:
        if isinstance(m, bool) or int(m) != m or m < 1:
            raise DomainError(f"multipliers must be positive integers, got {m!r}")
        ms.append(int(m))
    if not ms:
        raise DomainError("need at least one multiplier")
    ms.sort()
    n0 = s.n
    if n0 <= 0:
        raise DomainError("scenario has no parcels to scale")

    terms, linear = _factorial_terms(s, home_term)
    imbalance = math.fsum(w * x for w, x in terms)
    a = imbalance / n0
    c = (math.fsum(w * (_xlogx(x) - x) for w, x in terms) - imbalance * math.log(n0) + linear) / n0

    n_values, totals, deviations = [], [], []
    for m in ms:
        g = general_total_entropy(s.scaled(m), home_term).total
        n = n0 * m
        lead = a * n * math.log(n) + c * n
        n_values.append(n)
        totals.append(g)
        deviations.append(abs(g - lead) / n)

    x = np.asarray(n_values)
    y = np.asarray(totals) - a * x * np.log(x)
    slope = float(x @ y / (x @ x))
    return ScalingReport(
        multipliers=tuple(ms),
        n_values=tuple(n_values),
        totals=tuple(totals),
        slope=slope,
        leading_slope=c,
        nlogn_coefficient=a,
        deviations=tuple(deviations),
        max_deviation=max(deviations),
    )
