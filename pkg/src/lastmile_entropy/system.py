"""System-wide entropy: carrier deliveries plus customer collection trips.

The carrier side is the multinomial over home stops (q_i parcels each) and
pickup points (p_k parcels each). The collection side counts orderings of the
independent customer trips to pickup points, ln(C_pickup!).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .entropy import Allocation, log_factorial
from .errors import DomainError, PreconditionError

REL_TOL = 1e-9


def _positive_ints(values, name: str) -> tuple[int, ...]:
    out = []
    for v in values:
        if int(v) != v or v < 1:
            raise DomainError(f"{name} entries must be integers >= 1, got {v!r}")
        out.append(int(v))
    return tuple(out)


@dataclass(frozen=True)
class SystemState:
    home_parcels: tuple[int, ...] = ()
    pickup_parcels: tuple[int, ...] = ()
    c_pickup: int = 0

    def __post_init__(self):
        object.__setattr__(self, "home_parcels", _positive_ints(self.home_parcels, "home_parcels"))
        object.__setattr__(self, "pickup_parcels", _positive_ints(self.pickup_parcels, "pickup_parcels"))
        n_pickup = sum(self.pickup_parcels)
        if self.c_pickup < 0:
            raise DomainError("c_pickup must be >= 0")
        if self.c_pickup > n_pickup:
            raise DomainError(f"c_pickup={self.c_pickup} exceeds the {n_pickup} parcels at pickup points")
        # every occupied pickup point is visited by at least one customer
        if self.c_pickup < len(self.pickup_parcels):
            raise DomainError(
                f"c_pickup={self.c_pickup} is below the {len(self.pickup_parcels)} occupied pickup points"
            )

    @classmethod
    def home_only(cls, home_parcels: Sequence[int]) -> "SystemState":
        return cls(tuple(home_parcels), (), 0)

    @classmethod
    def pickup_only(cls, pickup_parcels: Sequence[int], c_pickup: int | None = None) -> "SystemState":
        """All parcels at pickup points; defaults to one customer per parcel."""
        pickup = tuple(pickup_parcels)
        return cls((), pickup, sum(pickup) if c_pickup is None else c_pickup)

    @property
    def n(self) -> int:
        return sum(self.home_parcels) + sum(self.pickup_parcels)

    @property
    def n_pickup(self) -> int:
        return sum(self.pickup_parcels)

    @property
    def c_home(self) -> int:
        return len(self.home_parcels)

    @property
    def c_total(self) -> int:
        return self.c_home + self.c_pickup

    @property
    def k(self) -> int:
        return len(self.pickup_parcels)


def delivery_entropy(s: SystemState) -> float:
    if s.n < 1:
        raise DomainError("delivery entropy needs at least one parcel")
    grouped = math.fsum(log_factorial(p) for p in s.pickup_parcels + s.home_parcels)
    return max(log_factorial(s.n) - grouped, 0.0)


def collection_entropy(c_pickup: int) -> float:
    if c_pickup < 0:
        raise DomainError("c_pickup must be >= 0")
    return log_factorial(c_pickup)


def total_entropy(s: SystemState) -> float:
    return delivery_entropy(s) + collection_entropy(s.c_pickup)


def normalized_total(s: SystemState) -> float | None:
    """Total entropy over the home-delivery baseline ln(N!); ``None`` for N < 2."""
    if s.n < 2:
        return None
    return total_entropy(s) / log_factorial(s.n)


class ConservationSplit(NamedTuple):
    delivery: float
    customer: float
    total: float


def conservation_check(a) -> ConservationSplit:
    """Carrier/customer split when every parcel sits at an interchangeable service point."""
    a = a if isinstance(a, Allocation) else Allocation.of(a)
    if a.n < 1:
        raise DomainError("conservation check needs at least one parcel")
    customer = math.fsum(log_factorial(p) for p in a.positive)
    delivery = log_factorial(a.n) - customer
    return ConservationSplit(delivery, customer, delivery + customer)


class SpatialIncrease(NamedTuple):
    total: float
    baseline: float
    strictly_greater: bool


def spatial_increase_check(pickup_counts: Sequence[int]) -> SpatialIncrease:
    """Pure pickup consolidation with one customer per parcel versus pure home delivery."""
    counts = _positive_ints(pickup_counts, "pickup_counts")
    if len(counts) < 2:
        raise PreconditionError("the spatial increase result needs at least two pickup points")
    state = SystemState.pickup_only(counts)
    baseline = log_factorial(state.n)
    total = total_entropy(state)
    return SpatialIncrease(total, baseline, total > baseline)


@dataclass(frozen=True)
class TemporalScenario:
    n_parcels: int
    n_events: int
    event_allocation: tuple[int, ...] | None = None
    c_pickup_customers: int = 0
    u_trips: int = 0

    def __post_init__(self):
        if self.event_allocation is not None:
            alloc = tuple(int(c) for c in self.event_allocation)
            if sum(alloc) != self.n_events:
                raise PreconditionError(
                    f"event allocation sums to {sum(alloc)}, expected C={self.n_events}"
                )
            object.__setattr__(self, "event_allocation", alloc)


class TemporalEntropy(NamedTuple):
    before: float
    after: float


def temporal_entropy(t: TemporalScenario) -> TemporalEntropy:
    """Batching N parcels into C delivery events: ln(N!) -> ln(C!)."""
    if t.n_events < 0 or t.n_parcels < 0:
        raise DomainError("counts must be non-negative")
    if t.n_events > t.n_parcels:
        raise PreconditionError(f"C={t.n_events} delivery events exceed N={t.n_parcels} parcels")
    return TemporalEntropy(log_factorial(t.n_parcels), log_factorial(t.n_events))


def customer_temporal_entropy(t: TemporalScenario) -> float:
    """Collection entropy after customers merge retrievals into U trips."""
    if t.u_trips < 0:
        raise DomainError("u_trips must be non-negative")
    if t.u_trips > t.c_pickup_customers:
        raise PreconditionError(
            f"U={t.u_trips} trips exceed the {t.c_pickup_customers} pickup customers"
        )
    return log_factorial(t.u_trips)


@dataclass(frozen=True)
class ChainingSpectrum:
    """Total system entropy as the number of independent collection trips U varies."""

    entries: tuple[tuple[int, float], ...]
    baseline: float
    bracket: tuple[int, int] | None = field(default=None)


def chaining_spectrum(s: SystemState) -> ChainingSpectrum:
    """Evaluate total entropy with collection term ln(U!) for U = 0..C_pickup.

    ``bracket`` is (largest U at or below the baseline ln(N!), smallest U at or
    above it), or ``None`` when the whole spectrum lies on one side.
    """
    g_delivery = delivery_entropy(s)
    entries = tuple((u, g_delivery + log_factorial(u)) for u in range(s.c_pickup + 1))
    baseline = log_factorial(s.n)
    tol = REL_TOL * max(baseline, 1.0)
    below = [u for u, g in entries if g <= baseline + tol]
    above = [u for u, g in entries if g >= baseline - tol]
    bracket = (max(below), min(above)) if below and above else None
    return ChainingSpectrum(entries, baseline, bracket)
