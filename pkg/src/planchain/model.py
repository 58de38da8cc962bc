"""Core domain model for chaining time-windowed vehicle plans.

A *plan* is an opaque timed task: it occupies a vehicle from an origin
location/time to a destination location/time and may be delayed uniformly
by up to its delay budget.  A *vehicle* is a potential chain head with a
start location and start time.  This module holds the shared primitives:
travel-time lookups, connection feasibility, and connection costs under
the supported cost policies.  Every other layer (variant generation, flow
solver, oracles, DARP pipeline) builds on exactly these predicates, which
keeps them mutually consistent.

All times are integer ticks at one-second resolution and all costs are
non-negative integers, so there is no floating-point tolerance anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InputError

TimePoint = int
Duration = int
LocationId = int
Cost = int


class TravelMatrix:
    """Dense, possibly asymmetric travel-time matrix in ticks.

    Entries must be non-negative with a zero diagonal.  The triangle
    inequality is *not* assumed anywhere in the package.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries) -> None:
        arr = np.asarray(entries, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise InputError("travel matrix must be square")
        if arr.size and (arr < 0).any():
            raise InputError("travel matrix entries must be non-negative")
        if arr.size and np.diagonal(arr).any():
            raise InputError("travel matrix diagonal must be zero")
        arr.setflags(write=False)
        self._entries = arr

    @classmethod
    def from_coordinates(cls, coordinates, ticks_per_unit: int = 1) -> "TravelMatrix":
        """Manhattan-metric matrix for integer grid coordinates."""
        if ticks_per_unit < 0:
            raise InputError("ticks_per_unit must be non-negative")
        pts = np.asarray(list(coordinates), dtype=np.int64)
        if pts.size == 0:
            return cls(np.zeros((0, 0), dtype=np.int64))
        dist = np.abs(pts[:, None, :] - pts[None, :, :]).sum(axis=2)
        return cls(dist * int(ticks_per_unit))

    @property
    def size(self) -> int:
        return self._entries.shape[0]

    @property
    def array(self) -> np.ndarray:
        """Read-only int64 view of the matrix."""
        return self._entries

    def duration(self, a: LocationId, b: LocationId) -> Duration:
        if not (0 <= a < self.size and 0 <= b < self.size):
            raise InputError(f"location pair ({a}, {b}) outside {self.size}x{self.size} matrix")
        return int(self._entries[a, b])

    def rows(self) -> list[list[int]]:
        return self._entries.tolist()

    def __eq__(self, other) -> bool:
        return isinstance(other, TravelMatrix) and np.array_equal(self._entries, other._entries)

    def __repr__(self) -> str:
        return f"TravelMatrix(size={self.size})"


@dataclass(frozen=True)
class Plan:
    """A timed task with a uniform delay budget (its time window)."""

    id: int
    origin_location: LocationId
    destination_location: LocationId
    t_or: TimePoint
    t_de: TimePoint
    d_max: Duration

    def __post_init__(self) -> None:
        if self.t_or < 0 or self.t_de < 0:
            raise InputError(f"plan {self.id}: times must be non-negative")
        if self.t_or > self.t_de:
            raise InputError(f"plan {self.id}: origin time {self.t_or} after destination time {self.t_de}")
        if self.d_max < 0:
            raise InputError(f"plan {self.id}: negative delay budget")


@dataclass(frozen=True)
class Vehicle:
    """A potential chain head: a start location and a start time."""

    id: int
    start_location: LocationId
    t_st: TimePoint

    def __post_init__(self) -> None:
        if self.t_st < 0:
            raise InputError(f"vehicle {self.id}: negative start time")


@dataclass(frozen=True)
class VariantRef:
    """A plan shifted later by ``delay`` ticks; delay 0 is the base plan."""

    plan_id: int
    delay: Duration

    def __post_init__(self) -> None:
        if self.delay < 0:
            raise InputError(f"variant of plan {self.plan_id}: negative delay")


@dataclass(frozen=True)
class FleetSize:
    """Count one unit per used vehicle; connections between plans are free."""


@dataclass(frozen=True)
class TravelCost:
    """Connection cost equals the travel time between the endpoints."""


@dataclass(frozen=True)
class TravelCostWaitCapped:
    """Travel-time cost, but connections whose wait exceeds ``delta`` are dropped."""

    delta: Duration

    def __post_init__(self) -> None:
        if self.delta < 0:
            raise InputError("wait cap must be non-negative")


@dataclass(frozen=True)
class TravelCostWaitPenalized:
    """Travel-time cost plus ``alpha`` per tick of wait, rounded half-up."""

    alpha: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", Fraction(self.alpha))
        if self.alpha < 0:
            raise InputError("wait penalty must be non-negative")


CostPolicy = FleetSize | TravelCost | TravelCostWaitCapped | TravelCostWaitPenalized

Endpoint = Plan | Vehicle | VariantRef


@dataclass(frozen=True)
class ChainingInstance:
    """Plans, vehicles, travel times, and the active cost policy."""

    plans: tuple[Plan, ...]
    vehicles: tuple[Vehicle, ...]
    travel: TravelMatrix
    policy: CostPolicy

    def __post_init__(self) -> None:
        plans = tuple(sorted(self.plans, key=lambda p: p.id))
        vehicles = tuple(sorted(self.vehicles, key=lambda v: v.id))
        object.__setattr__(self, "plans", plans)
        object.__setattr__(self, "vehicles", vehicles)
        plan_map = {}
        for p in plans:
            if p.id in plan_map:
                raise InputError(f"duplicate plan id {p.id}")
            for loc in (p.origin_location, p.destination_location):
                if not (0 <= loc < self.travel.size):
                    raise InputError(f"plan {p.id}: location {loc} outside travel matrix")
            plan_map[p.id] = p
        vehicle_map = {}
        for v in vehicles:
            if v.id in vehicle_map:
                raise InputError(f"duplicate vehicle id {v.id}")
            if not (0 <= v.start_location < self.travel.size):
                raise InputError(f"vehicle {v.id}: location {v.start_location} outside travel matrix")
            vehicle_map[v.id] = v
        object.__setattr__(self, "_plan_map", plan_map)
        object.__setattr__(self, "_vehicle_map", vehicle_map)

    def plan(self, plan_id: int) -> Plan:
        try:
            return self._plan_map[plan_id]
        except KeyError:
            raise InputError(f"unknown plan id {plan_id}") from None

    def vehicle(self, vehicle_id: int) -> Vehicle:
        try:
            return self._vehicle_map[vehicle_id]
        except KeyError:
            raise InputError(f"unknown vehicle id {vehicle_id}") from None

    def variant(self, plan_id: int, delay: Duration) -> VariantRef:
        plan = self.plan(plan_id)
        if not (0 <= delay <= plan.d_max):
            raise InputError(f"plan {plan_id}: delay {delay} outside [0, {plan.d_max}]")
        return VariantRef(plan_id, delay)

    def with_policy(self, policy: CostPolicy) -> "ChainingInstance":
        return ChainingInstance(self.plans, self.vehicles, self.travel, policy)


def _as_variant(instance: ChainingInstance, x: Plan | VariantRef) -> VariantRef:
    if isinstance(x, Plan):
        instance.plan(x.id)
        return VariantRef(x.id, 0)
    instance.plan(x.plan_id)
    return x


def origin_time(instance: ChainingInstance, ref: Plan | VariantRef) -> TimePoint:
    ref = _as_variant(instance, ref)
    return instance.plan(ref.plan_id).t_or + ref.delay


def destination_time(instance: ChainingInstance, ref: Plan | VariantRef) -> TimePoint:
    ref = _as_variant(instance, ref)
    return instance.plan(ref.plan_id).t_de + ref.delay


def ready_time(instance: ChainingInstance, a: Endpoint) -> TimePoint:
    """Earliest moment the chain can leave ``a`` toward a successor."""
    if isinstance(a, Vehicle):
        return instance.vehicle(a.id).t_st
    return destination_time(instance, a)


def travel_time(instance: ChainingInstance, a: Endpoint, b: Plan | VariantRef) -> Duration:
    """Travel ticks from the exit point of ``a`` to the entry point of ``b``.

    Delays never move locations, so variants look up the same matrix entry
    as their base plans.
    """
    if isinstance(a, Vehicle):
        loc_a = instance.vehicle(a.id).start_location
    else:
        loc_a = instance.plan(_as_variant(instance, a).plan_id).destination_location
    loc_b = instance.plan(_as_variant(instance, b).plan_id).origin_location
    return instance.travel.duration(loc_a, loc_b)


def _order_key(plan: Plan) -> tuple[int, int]:
    return (plan.t_or, plan.id)


def _check_distinct_plans(a: Endpoint, b: VariantRef) -> None:
    if not isinstance(a, Vehicle):
        a_pid = a.id if isinstance(a, Plan) else a.plan_id
        if a_pid == b.plan_id:
            raise InputError(f"cannot connect plan {b.plan_id} to one of its own variants")


def connection_feasible(instance: ChainingInstance, a: Endpoint, b: Plan | VariantRef) -> bool:
    """True when ``b`` (at its delay) can directly follow ``a`` in a chain.

    The temporal condition is travel time <= available gap.  When the gap
    closes exactly at zero travel time, plan-to-plan connections are
    additionally ordered by (origin time, id) so that the connection
    relation stays acyclic even for degenerate simultaneous plans.
    """
    b = _as_variant(instance, b)
    _check_distinct_plans(a, b)
    if isinstance(a, VariantRef):
        instance.variant(a.plan_id, a.delay)
    instance.variant(b.plan_id, b.delay)
    ftt = travel_time(instance, a, b)
    ready = ready_time(instance, a)
    start = origin_time(instance, b)
    if ftt > start - ready:
        return False
    if not isinstance(a, Vehicle) and ready == start and ftt == 0:
        plan_a = instance.plan(a.id if isinstance(a, Plan) else a.plan_id)
        plan_b = instance.plan(b.plan_id)
        return _order_key(plan_a) < _order_key(plan_b)
    return True


def connection_wait(instance: ChainingInstance, a: Endpoint, b: Plan | VariantRef) -> Duration:
    """Idle ticks between finishing ``a`` plus travel and starting ``b``.

    Vehicle origins wait from their start time, mirroring the feasibility
    condition; a vehicle idling before its first plan counts as waiting.
    """
    b = _as_variant(instance, b)
    return origin_time(instance, b) - ready_time(instance, a) - travel_time(instance, a, b)


def connection_cost(
    instance: ChainingInstance,
    a: Endpoint,
    b: Plan | VariantRef,
    policy: CostPolicy | None = None,
) -> Cost | None:
    """Cost of the connection under ``policy``; ``None`` means forbidden.

    Forbidden connections are materialized by omitting the edge from the
    network, never by a sentinel "infinite" cost.
    """
    if policy is None:
        policy = instance.policy
    if not connection_feasible(instance, a, b):
        raise InputError("connection_cost called on an infeasible connection")
    if isinstance(policy, FleetSize):
        return 1 if isinstance(a, Vehicle) else 0
    ftt = travel_time(instance, a, b)
    if isinstance(policy, TravelCost):
        return ftt
    wait = connection_wait(instance, a, b)
    if isinstance(policy, TravelCostWaitCapped):
        return None if wait > policy.delta else ftt
    if isinstance(policy, TravelCostWaitPenalized):
        return ftt + int((policy.alpha * wait + Fraction(1, 2)).__floor__())
    raise InputError(f"unknown cost policy {policy!r}")


def minimal_target_delay(instance: ChainingInstance, a: Endpoint, b: Plan) -> Duration | None:
    """Smallest delay of ``b`` making the connection from ``a`` feasible.

    Returns ``None`` when no delay within the budget works.  This is the
    single source of truth for the variant generator and the oracles.
    """
    _check_distinct_plans(a, VariantRef(b.id, 0))
    ftt = travel_time(instance, a, b)
    ready = ready_time(instance, a)
    delay = max(ftt - (b.t_or - ready), 0)
    if delay > b.d_max:
        return None
    if not isinstance(a, Vehicle) and ftt == 0 and ready == b.t_or + delay:
        plan_a = instance.plan(a.id if isinstance(a, Plan) else a.plan_id)
        if not _order_key(plan_a) < _order_key(b):
            delay += 1
            if delay > b.d_max:
                return None
    return delay
