"""Static dial-a-ride layer: exact batch solving chained into full routes.

The pipeline splits demand by request time into batches, solves each batch
exactly (free floating, without vehicles), converts the resulting route
plans into chaining plans whose delay budget is the largest uniform shift
that keeps every stop inside its window, and finally chains the plans
across batches with the exact chaining solver.  A classic insertion
heuristic provides the comparison baseline.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

from .errors import GuardExceededError, InfeasibleError, InputError
from .model import ChainingInstance, CostPolicy, Plan, TravelCost, TravelMatrix, Vehicle
from .chainsolve import solve_chaining

PICKUP = "pickup"
DROPOFF = "dropoff"


@dataclass(frozen=True)
class Request:
    """One passenger trip: origin to destination, departing at ``t_r``.

    The pickup may happen in [t_r, t_r + max_delay]; the arrival no later
    than t_r + direct travel + max_delay.
    """

    id: int
    origin: int
    destination: int
    t_r: int
    max_delay: int

    def __post_init__(self) -> None:
        if self.t_r < 0:
            raise InputError(f"request {self.id}: negative departure time")
        if self.max_delay < 0:
            raise InputError(f"request {self.id}: negative delay budget")

    @property
    def latest_pickup(self) -> int:
        return self.t_r + self.max_delay

    def direct(self, travel: TravelMatrix) -> int:
        return travel.duration(self.origin, self.destination)

    def latest_arrival(self, travel: TravelMatrix) -> int:
        return self.t_r + self.direct(travel) + self.max_delay


@dataclass(frozen=True)
class AutoFleet:
    """Marker: create one virtual vehicle per produced plan, at its origin."""


AUTO_FLEET = AutoFleet()


@dataclass(frozen=True)
class DarpInstance:
    requests: tuple[Request, ...]
    travel: TravelMatrix
    capacity: int
    fleet: tuple[Vehicle, ...] | AutoFleet

    def __post_init__(self) -> None:
        requests = tuple(sorted(self.requests, key=lambda r: r.id))
        object.__setattr__(self, "requests", requests)
        if self.capacity < 1:
            raise InputError("vehicle capacity must be at least 1")
        seen = set()
        for r in requests:
            if r.id in seen:
                raise InputError(f"duplicate request id {r.id}")
            seen.add(r.id)
            for loc in (r.origin, r.destination):
                if not (0 <= loc < self.travel.size):
                    raise InputError(f"request {r.id}: location {loc} outside travel matrix")
        if not isinstance(self.fleet, AutoFleet):
            fleet = tuple(sorted(self.fleet, key=lambda v: v.id))
            object.__setattr__(self, "fleet", fleet)
            vids = set()
            for v in fleet:
                if v.id in vids:
                    raise InputError(f"duplicate vehicle id {v.id}")
                vids.add(v.id)
                if not (0 <= v.start_location < self.travel.size):
                    raise InputError(f"vehicle {v.id}: location {v.start_location} outside travel matrix")

    def request(self, rid: int) -> Request:
        for r in self.requests:
            if r.id == rid:
                return r
        raise InputError(f"unknown request id {rid}")


@dataclass(frozen=True)
class Stop:
    request_id: int
    kind: str  # pickup | dropoff
    location: int
    time: int


@dataclass(frozen=True)
class RoutePlan:
    """An ordered stop schedule for one vehicle plan."""

    stops: tuple[Stop, ...]

    @property
    def first_time(self) -> int:
        return self.stops[0].time

    @property
    def last_time(self) -> int:
        return self.stops[-1].time

    @property
    def total_duration(self) -> int:
        return self.last_time - self.first_time if self.stops else 0

    def driving(self, travel: TravelMatrix) -> int:
        return sum(
            travel.duration(a.location, b.location) for a, b in zip(self.stops, self.stops[1:])
        )

    def request_ids(self) -> tuple[int, ...]:
        return tuple(sorted({s.request_id for s in self.stops}))

    def shifted(self, delay: int) -> "RoutePlan":
        return RoutePlan(tuple(Stop(s.request_id, s.kind, s.location, s.time + delay) for s in self.stops))


@dataclass(frozen=True)
class DarpSolution:
    method: str
    batch_len: int | None
    routes: tuple[tuple[Vehicle, RoutePlan], ...]
    objective: int
    request_delays: tuple[tuple[int, int], ...]  # (request id, pickup delay)


@dataclass(frozen=True)
class Metrics:
    total_cost: int
    used_vehicles: int
    occupancy: tuple[tuple[int, int], ...]  # (onboard count, ticks)
    delays: tuple[tuple[int, int], ...]  # (delay ticks, requests)


def _latest_for_stop(stop: Stop, request: Request, travel: TravelMatrix) -> int:
    if stop.kind == PICKUP:
        return request.latest_pickup
    return request.latest_arrival(travel)


def _schedule(specs, travel: TravelMatrix, capacity: int, *, start_loc=None, start_time=0):
    """Earliest-feasible stop times for an ordered (request, kind) list.

    Pickups never start before their request's departure time; with a
    vehicle (``start_loc``) the first arrival includes the approach leg.
    Returns the stop tuple or None when a window or the capacity breaks.
    """
    stops: list[Stop] = []
    onboard = 0
    picked: set[int] = set()
    for k, (req, kind) in enumerate(specs):
        loc = req.origin if kind == PICKUP else req.destination
        if k == 0:
            if kind != PICKUP:
                return None
            arrival = start_time + travel.duration(start_loc, loc) if start_loc is not None else start_time
            t = max(arrival, req.t_r)
        else:
            prev = stops[-1]
            arrival = prev.time + travel.duration(prev.location, loc)
            t = max(arrival, req.t_r) if kind == PICKUP else arrival
        if kind == PICKUP:
            if req.id in picked:
                return None
            picked.add(req.id)
            onboard += 1
            if onboard > capacity or t > req.latest_pickup:
                return None
        else:
            if req.id not in picked:
                return None
            onboard -= 1
            if t > req.latest_arrival(travel):
                return None
        stops.append(Stop(req.id, kind, loc, t))
    return tuple(stops)


def optimal_plan_for_group(group, travel: TravelMatrix, capacity: int, anchor: int = 0) -> RoutePlan | None:
    """Minimum-duration plan serving all requests of ``group`` together.

    Exhausts every pickup/dropoff interleaving that respects precedence,
    scheduling each stop at the earliest feasible time at or after the
    request's departure time (and at or after ``anchor`` for the first
    stop).  Ties fall to less driving, then to a fixed stop order.
    """
    reqs = sorted(group, key=lambda r: r.id)
    if len(reqs) > capacity:
        raise GuardExceededError(f"group of {len(reqs)} exceeds capacity {capacity}")
    if not reqs:
        return None
    best: tuple | None = None

    def dfs(seq, last_loc, last_time, first_time, onboard, pending, riding, driving):
        nonlocal best
        if not pending and not riding:
            key = (last_time - first_time, driving, tuple(seq))
            if best is None or key < best:
                best = key
            return
        if best is not None and first_time is not None and last_time - first_time > best[0]:
            return
        for req in pending:
            t = max(anchor, req.t_r) if last_loc is None else max(last_time + travel.duration(last_loc, req.origin), req.t_r)
            if t > req.latest_pickup or onboard + 1 > capacity:
                continue
            dfs(
                seq + [(0, req.id)],
                req.origin,
                t,
                t if first_time is None else first_time,
                onboard + 1,
                [r for r in pending if r is not req],
                riding + [req],
                driving if last_loc is None else driving + travel.duration(last_loc, req.origin),
            )
        for req in riding:
            t = last_time + travel.duration(last_loc, req.destination)
            if t > req.latest_arrival(travel):
                continue
            dfs(
                seq + [(1, req.id)],
                req.destination,
                t,
                first_time,
                onboard - 1,
                pending,
                [r for r in riding if r is not req],
                driving + travel.duration(last_loc, req.destination),
            )

    dfs([], None, None, None, 0, reqs, [], 0)
    if best is None:
        return None
    by_id = {r.id: r for r in reqs}
    specs = [(by_id[rid], PICKUP if code == 0 else DROPOFF) for code, rid in best[2]]
    stops = _schedule(specs, travel, capacity, start_time=anchor)
    if stops is None:
        raise InfeasibleError("group schedule vanished on replay")  # pragma: no cover
    return RoutePlan(stops)


@dataclass(frozen=True)
class BatchResult:
    plans: tuple[RoutePlan, ...]
    proven_optimal: bool


def solve_batch_exact(
    batch,
    travel: TravelMatrix,
    capacity: int,
    *,
    max_batch_requests: int = 12,
    time_limit_ms: int | None = None,
) -> BatchResult:
    """Optimal set partitioning of a batch into shared route plans.

    Feasible groups are enumerated bottom-up (a group is skipped when any
    subset already failed), each with its optimal plan; an exact search
    then covers every request with exactly one group, minimizing total
    plan duration.  Ties prefer fewer groups, then lexicographic group
    ids.  With a time limit the incumbent partition is returned instead
    of the proven optimum.
    """
    reqs = sorted(batch, key=lambda r: r.id)
    if not reqs:
        return BatchResult((), True)
    if len(reqs) > max_batch_requests:
        raise GuardExceededError(
            f"batch of {len(reqs)} requests exceeds the guard of {max_batch_requests}; use a shorter batch length"
        )
    feasible: dict[frozenset[int], RoutePlan] = {}
    by_id = {r.id: r for r in reqs}
    for size in range(1, min(capacity, len(reqs)) + 1):
        for combo in combinations(reqs, size):
            ids = frozenset(r.id for r in combo)
            if size > 1 and any(ids - {rid} not in feasible for rid in ids):
                continue
            plan = optimal_plan_for_group(combo, travel, capacity)
            if plan is not None:
                feasible[ids] = plan

    groups_of: dict[int, list[tuple[tuple[int, ...], RoutePlan, int]]] = {r.id: [] for r in reqs}
    for ids, plan in feasible.items():
        entry = (tuple(sorted(ids)), plan, plan.total_duration)
        for rid in ids:
            groups_of[rid].append(entry)
    for rid in groups_of:
        groups_of[rid].sort(key=lambda e: e[0])

    lb: dict[int, Fraction] = {
        rid: min(Fraction(dur, len(ids)) for ids, _, dur in entries)
        for rid, entries in groups_of.items()
    }

    singleton = [feasible[frozenset({r.id})] for r in reqs]
    best_cost = sum(p.total_duration for p in singleton)
    best_key = (best_cost, len(singleton), tuple((r.id,) for r in reqs))
    best_plans = list(singleton)
    deadline = time.monotonic() + time_limit_ms / 1000.0 if time_limit_ms is not None else None
    timed_out = False

    def search(unserved: frozenset[int], cost: int, chosen: list):
        nonlocal best_cost, best_key, best_plans, timed_out
        if deadline is not None and time.monotonic() > deadline:
            timed_out = True
            return
        if not unserved:
            key = (cost, len(chosen), tuple(sorted(ids for ids, _, _ in chosen)))
            if key < best_key:
                best_key = key
                best_cost = cost
                best_plans = [plan for _, plan, _ in chosen]
            return
        rid = min(unserved)
        for ids, plan, dur in groups_of[rid]:
            if timed_out:
                return
            ids_set = frozenset(ids)
            if not ids_set <= unserved:
                continue
            rest = unserved - ids_set
            rest_lb = sum((lb[x] for x in rest), Fraction(0))
            if cost + dur + rest_lb > best_cost:
                continue
            chosen.append((ids, plan, dur))
            search(rest, cost + dur, chosen)
            chosen.pop()

    search(frozenset(by_id), 0, [])
    ordered = tuple(sorted(best_plans, key=lambda p: (p.first_time, p.request_ids())))
    return BatchResult(ordered, not timed_out)


def plans_to_chaining(plans, instance: DarpInstance) -> tuple[tuple[Plan, ...], dict[int, RoutePlan]]:
    """Convert route plans into chaining plans with uniform-shift budgets.

    The delay budget is the largest uniform shift keeping every stop
    within its window, i.e. the minimum per-stop slack; plans scheduled at
    their earliest feasible times maximize it.
    """
    chain_plans: list[Plan] = []
    mapping: dict[int, RoutePlan] = {}
    for idx, plan in enumerate(plans):
        slack = min(
            _latest_for_stop(stop, instance.request(stop.request_id), instance.travel) - stop.time
            for stop in plan.stops
        )
        if slack < 0:
            raise InputError(f"plan {idx} violates a window before any shift")
        chain_plans.append(
            Plan(
                id=idx,
                origin_location=plan.stops[0].location,
                destination_location=plan.stops[-1].location,
                t_or=plan.first_time,
                t_de=plan.last_time,
                d_max=slack,
            )
        )
        mapping[idx] = plan
    return tuple(chain_plans), mapping


def total_driving_cost(routes, travel: TravelMatrix) -> int:
    """Driven ticks over all routes, including the empty approach legs."""
    total = 0
    for vehicle, plan in routes:
        if not plan.stops:
            continue
        total += travel.duration(vehicle.start_location, plan.stops[0].location)
        total += plan.driving(travel)
    return total


def _solution_from_routes(method, batch_len, routes, instance) -> DarpSolution:
    delays = []
    for _, plan in routes:
        for stop in plan.stops:
            if stop.kind == PICKUP:
                delays.append((stop.request_id, stop.time - instance.request(stop.request_id).t_r))
    return DarpSolution(
        method=method,
        batch_len=batch_len,
        routes=tuple(routes),
        objective=total_driving_cost(routes, instance.travel),
        request_delays=tuple(sorted(delays)),
    )


def run_proposed(
    instance: DarpInstance,
    batch_len: int,
    *,
    time_limit_ms: int | None = None,
    chain_policy: CostPolicy | None = None,
    threads: int = 1,
    max_batch_requests: int = 12,
    _method: str = "proposed",
) -> DarpSolution:
    """Batch-split pipeline: exact batches, then exact chaining across them.

    Requests are bucketed by floor((t_r - min t_r) / batch_len) (a request
    exactly on a boundary joins the later batch), each batch is solved
    free floating, and the produced plans are chained with the instance
    fleet (or one virtual vehicle per plan for an auto fleet).
    """
    if batch_len < 1:
        raise InputError("batch length must be at least one tick")
    reqs = instance.requests
    if not reqs:
        return DarpSolution(_method, batch_len, (), 0, ())
    t0 = min(r.t_r for r in reqs)
    buckets: dict[int, list[Request]] = {}
    for r in reqs:
        buckets.setdefault((r.t_r - t0) // batch_len, []).append(r)
    batch_list = [buckets[k] for k in sorted(buckets)]

    def solve_one(batch):
        return solve_batch_exact(
            batch,
            instance.travel,
            instance.capacity,
            max_batch_requests=max_batch_requests,
            time_limit_ms=time_limit_ms,
        )

    if threads > 1 and len(batch_list) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(solve_one, batch_list))
    else:
        results = [solve_one(b) for b in batch_list]

    all_plans = [plan for res in results for plan in res.plans]
    label = _method if all(res.proven_optimal for res in results) else f"{_method}-lim"
    chain_plans, mapping = plans_to_chaining(all_plans, instance)
    if isinstance(instance.fleet, AutoFleet):
        vehicles = tuple(Vehicle(p.id, p.origin_location, 0) for p in chain_plans)
    else:
        vehicles = instance.fleet
    chain_instance = ChainingInstance(
        plans=chain_plans,
        vehicles=vehicles,
        travel=instance.travel,
        policy=chain_policy if chain_policy is not None else TravelCost(),
    )
    try:
        chain_solution = solve_chaining(chain_instance)
    except InfeasibleError as exc:
        raise InfeasibleError(
            f"chaining the {len(chain_plans)} batch plans failed with {len(vehicles)} vehicles; "
            f"the fleet is too small ({exc})"
        ) from exc

    routes = []
    for chain in chain_solution.chains:
        stops: list[Stop] = []
        for ref in chain.elements:
            stops.extend(mapping[ref.plan_id].shifted(ref.delay).stops)
        routes.append((chain.vehicle, RoutePlan(tuple(stops))))
    return _solution_from_routes(label, batch_len, routes, instance)


def run_single_batch(instance: DarpInstance, **kwargs) -> DarpSolution:
    """Degenerate batching: one batch spanning the whole horizon."""
    reqs = instance.requests
    span = (max(r.t_r for r in reqs) - min(r.t_r for r in reqs) + 1) if reqs else 1
    return run_proposed(instance, span, _method="single-batch", **kwargs)


def insertion_heuristic(instance: DarpInstance) -> DarpSolution:
    """Greedy baseline: cheapest feasible insertion, new vehicle as fallback.

    Requests are processed in departure order; each is tried at every
    pickup/dropoff position pair in every opened vehicle's route, and the
    smallest plan-duration increase wins (ties: lowest vehicle id, then
    earliest positions).  Only when no insertion fits is a vehicle opened,
    the nearest feasible unused one; an exhausted fleet raises.
    """
    if isinstance(instance.fleet, AutoFleet):
        raise InputError("the insertion heuristic needs an explicit fleet")
    specs_by_vehicle: dict[int, list] = {}
    vehicle_by_id = {v.id: v for v in instance.fleet}
    stops_by_vehicle: dict[int, tuple[Stop, ...]] = {}

    for req in sorted(instance.requests, key=lambda r: (r.t_r, r.id)):
        best = None
        for vid in sorted(specs_by_vehicle):
            vehicle = vehicle_by_id[vid]
            specs = specs_by_vehicle[vid]
            old_plan = RoutePlan(stops_by_vehicle[vid])
            for i in range(len(specs) + 1):
                for j in range(i + 1, len(specs) + 2):
                    trial = list(specs)
                    trial.insert(i, (req, PICKUP))
                    trial.insert(j, (req, DROPOFF))
                    stops = _schedule(
                        trial,
                        instance.travel,
                        instance.capacity,
                        start_loc=vehicle.start_location,
                        start_time=vehicle.t_st,
                    )
                    if stops is None:
                        continue
                    delta = (stops[-1].time - stops[0].time) - old_plan.total_duration
                    cand = (delta, vid, i, j)
                    if best is None or cand < best[0]:
                        best = (cand, trial, stops)
        if best is not None:
            _, trial, stops = best
            vid = best[0][1]
            specs_by_vehicle[vid] = trial
            stops_by_vehicle[vid] = stops
            continue
        opened = None
        for v in sorted(
            instance.fleet,
            key=lambda v: (instance.travel.duration(v.start_location, req.origin), v.id),
        ):
            if v.id in specs_by_vehicle:
                continue
            trial = [(req, PICKUP), (req, DROPOFF)]
            stops = _schedule(
                trial, instance.travel, instance.capacity, start_loc=v.start_location, start_time=v.t_st
            )
            if stops is not None:
                opened = (v.id, trial, stops)
                break
        if opened is None:
            raise InfeasibleError(f"fleet exhausted: request {req.id} fits no vehicle")
        specs_by_vehicle[opened[0]] = opened[1]
        stops_by_vehicle[opened[0]] = opened[2]

    routes = [(vehicle_by_id[vid], RoutePlan(stops_by_vehicle[vid])) for vid in sorted(specs_by_vehicle)]
    return _solution_from_routes("ih", None, routes, instance)


def validate_darp_solution(instance: DarpInstance, solution: DarpSolution) -> list[str]:
    """Independent feasibility check of a DARP solution; returns violations."""
    issues: list[str] = []
    travel = instance.travel
    seen_vehicles: set[int] = set()
    service: dict[int, dict[str, int]] = {}

    for vehicle, plan in solution.routes:
        if vehicle.id in seen_vehicles:
            issues.append(f"vehicle {vehicle.id} appears in more than one route")
        seen_vehicles.add(vehicle.id)
        if not isinstance(instance.fleet, AutoFleet) and vehicle.id not in {v.id for v in instance.fleet}:
            issues.append(f"vehicle {vehicle.id} is not part of the fleet")
        if not plan.stops:
            issues.append(f"vehicle {vehicle.id}: empty route")
            continue
        first = plan.stops[0]
        if first.time < vehicle.t_st + travel.duration(vehicle.start_location, first.location):
            issues.append(f"vehicle {vehicle.id}: cannot reach its first stop in time")
        onboard = 0
        picked: set[int] = set()
        for k, stop in enumerate(plan.stops):
            try:
                req = instance.request(stop.request_id)
            except InputError:
                issues.append(f"vehicle {vehicle.id}: unknown request {stop.request_id}")
                continue
            expected_loc = req.origin if stop.kind == PICKUP else req.destination
            if stop.location != expected_loc:
                issues.append(f"request {req.id}: {stop.kind} at wrong location {stop.location}")
            if k > 0:
                prev = plan.stops[k - 1]
                gap = stop.time - prev.time
                if gap < travel.duration(prev.location, stop.location):
                    issues.append(f"vehicle {vehicle.id}: stop {k} arrives faster than travel time allows")
            rec = service.setdefault(req.id, {})
            if stop.kind == PICKUP:
                if req.id in picked or "pickup" in rec:
                    issues.append(f"request {req.id}: picked up more than once")
                picked.add(req.id)
                onboard += 1
                if onboard > instance.capacity:
                    issues.append(f"vehicle {vehicle.id}: capacity exceeded at stop {k}")
                if not (req.t_r <= stop.time <= req.latest_pickup):
                    issues.append(f"request {req.id}: pickup at {stop.time} outside [{req.t_r}, {req.latest_pickup}]")
                rec["pickup"] = stop.time
            else:
                if req.id not in picked:
                    issues.append(f"request {req.id}: dropped off before pickup")
                else:
                    picked.discard(req.id)
                    onboard -= 1
                if stop.time > req.latest_arrival(travel):
                    issues.append(f"request {req.id}: arrival at {stop.time} after {req.latest_arrival(travel)}")
                rec["dropoff"] = stop.time
        if picked:
            issues.append(f"vehicle {vehicle.id}: requests {sorted(picked)} never dropped off")

    for req in instance.requests:
        rec = service.get(req.id)
        if rec is None or "pickup" not in rec or "dropoff" not in rec:
            issues.append(f"request {req.id} is not fully served")
    recomputed = total_driving_cost(solution.routes, travel)
    if recomputed != solution.objective:
        issues.append(f"objective {solution.objective} != recomputed driving cost {recomputed}")
    return issues


def evaluate_metrics(solution: DarpSolution, instance: DarpInstance) -> Metrics:
    """Cost, fleet usage, occupancy histogram, and per-request delays.

    Occupancy integrates the onboard count over each vehicle's active span
    (from leaving its start location to its last stop); the approach and
    any empty cruising count at occupancy zero.
    """
    issues = validate_darp_solution(instance, solution)
    if issues:
        raise InfeasibleError("metrics refused for an infeasible solution: " + "; ".join(issues[:3]))
    occupancy: dict[int, int] = {}
    used = 0
    for vehicle, plan in solution.routes:
        if not plan.stops:
            continue
        used += 1
        start = plan.first_time - instance.travel.duration(vehicle.start_location, plan.stops[0].location)
        t_prev = start
        onboard = 0
        for stop in plan.stops:
            span = stop.time - t_prev
            if span > 0:
                occupancy[onboard] = occupancy.get(onboard, 0) + span
            onboard += 1 if stop.kind == PICKUP else -1
            t_prev = stop.time
    delays: dict[int, int] = {}
    for _, delay in solution.request_delays:
        delays[delay] = delays.get(delay, 0) + 1
    return Metrics(
        total_cost=solution.objective,
        used_vehicles=used,
        occupancy=tuple(sorted(occupancy.items())),
        delays=tuple(sorted(delays.items())),
    )
