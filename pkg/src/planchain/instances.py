"""Instance and solution files, plus seeded random instance generation.

Files are JSON with an explicit schema tag and integer ticks everywhere,
serialized canonically (sorted keys, two-space indent, trailing newline)
so identical inputs produce byte-identical files.  The travel section is
either an explicit matrix or a grid section (integer coordinates with a
Manhattan metric scaled by ``ticks_per_unit``).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import InputError
from .model import (
    ChainingInstance,
    CostPolicy,
    FleetSize,
    Plan,
    TravelCost,
    TravelCostWaitCapped,
    TravelCostWaitPenalized,
    TravelMatrix,
    Vehicle,
)
from .darp import AUTO_FLEET, AutoFleet, DarpInstance, DarpSolution, Metrics, Request, RoutePlan, Stop
from .chainsolve import ChainSolution

CHAIN_INSTANCE_SCHEMA = "planchain.chain-instance.v1"
DARP_INSTANCE_SCHEMA = "planchain.darp-instance.v1"
CHAIN_SOLUTION_SCHEMA = "planchain.chain-solution.v1"
DARP_SOLUTION_SCHEMA = "planchain.darp-solution.v1"


def canonical_json_bytes(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode("utf-8")


def save_json(path, obj) -> None:
    Path(path).write_bytes(canonical_json_bytes(obj))


def load_json(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _require(data, key, context):
    if key not in data:
        raise InputError(f"{context}: missing field '{key}'")
    return data[key]


def _int_field(data, key, context):
    value = _require(data, key, context)
    if isinstance(value, bool) or not isinstance(value, int):
        raise InputError(f"{context}: field '{key}' must be an integer, got {value!r}")
    return value


# -- cost policies ----------------------------------------------------------

def policy_to_dict(policy: CostPolicy) -> dict:
    if isinstance(policy, FleetSize):
        return {"kind": "fleet"}
    if isinstance(policy, TravelCost):
        return {"kind": "cost"}
    if isinstance(policy, TravelCostWaitCapped):
        return {"kind": "cost-waitcap", "delta": policy.delta}
    if isinstance(policy, TravelCostWaitPenalized):
        return {"kind": "cost-waitpen", "alpha": str(policy.alpha)}
    raise InputError(f"unknown policy {policy!r}")


def policy_from_dict(data) -> CostPolicy:
    kind = _require(data, "kind", "policy")
    if kind == "fleet":
        return FleetSize()
    if kind == "cost":
        return TravelCost()
    if kind == "cost-waitcap":
        return TravelCostWaitCapped(_int_field(data, "delta", "policy"))
    if kind == "cost-waitpen":
        raw = _require(data, "alpha", "policy")
        try:
            return TravelCostWaitPenalized(Fraction(str(raw)))
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"policy: bad wait penalty {raw!r}") from exc
    raise InputError(f"policy: unknown kind {kind!r}")


def policy_from_cli(text: str) -> CostPolicy:
    """Parse the CLI policy syntax: fleet | cost | cost-waitcap:D | cost-waitpen:A."""
    if text == "fleet":
        return FleetSize()
    if text == "cost":
        return TravelCost()
    if text.startswith("cost-waitcap:"):
        try:
            return TravelCostWaitCapped(int(text.split(":", 1)[1]))
        except ValueError as exc:
            raise InputError(f"bad wait cap in {text!r}") from exc
    if text.startswith("cost-waitpen:"):
        try:
            return TravelCostWaitPenalized(Fraction(text.split(":", 1)[1]))
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"bad wait penalty in {text!r}") from exc
    raise InputError(f"unknown policy {text!r} (expected fleet | cost | cost-waitcap:D | cost-waitpen:A)")


# -- travel sections --------------------------------------------------------

def _travel_to_dict(travel: TravelMatrix) -> dict:
    return {"matrix": travel.rows()}


def _travel_from_dict(data, count: int) -> TravelMatrix:
    if ("matrix" in data) == ("grid" in data):
        raise InputError("travel: exactly one of 'matrix' or 'grid' must be present")
    if "matrix" in data:
        rows = data["matrix"]
        if len(rows) != count or any(len(r) != count for r in rows):
            raise InputError(f"travel: matrix must be {count}x{count}")
        return TravelMatrix(rows)
    grid = data["grid"]
    coords = _require(grid, "coordinates", "travel.grid")
    if len(coords) != count:
        raise InputError(f"travel.grid: expected {count} coordinates, got {len(coords)}")
    ticks = grid.get("ticks_per_unit", 1)
    return TravelMatrix.from_coordinates(coords, ticks_per_unit=ticks)


# -- chaining instances -----------------------------------------------------

def chain_instance_to_dict(instance: ChainingInstance) -> dict:
    return {
        "schema": CHAIN_INSTANCE_SCHEMA,
        "locations": {"count": instance.travel.size},
        "travel": _travel_to_dict(instance.travel),
        "plans": [
            {
                "id": p.id,
                "origin": p.origin_location,
                "destination": p.destination_location,
                "t_or": p.t_or,
                "t_de": p.t_de,
                "d_max": p.d_max,
            }
            for p in instance.plans
        ],
        "vehicles": [
            {"id": v.id, "location": v.start_location, "t_st": v.t_st} for v in instance.vehicles
        ],
        "policy": policy_to_dict(instance.policy),
    }


def chain_instance_from_dict(data) -> ChainingInstance:
    if data.get("schema") != CHAIN_INSTANCE_SCHEMA:
        raise InputError(f"expected schema {CHAIN_INSTANCE_SCHEMA}, got {data.get('schema')!r}")
    count = _int_field(_require(data, "locations", "instance"), "count", "locations")
    travel = _travel_from_dict(_require(data, "travel", "instance"), count)
    plans = tuple(
        Plan(
            id=_int_field(p, "id", "plan"),
            origin_location=_int_field(p, "origin", f"plan {p.get('id')}"),
            destination_location=_int_field(p, "destination", f"plan {p.get('id')}"),
            t_or=_int_field(p, "t_or", f"plan {p.get('id')}"),
            t_de=_int_field(p, "t_de", f"plan {p.get('id')}"),
            d_max=_int_field(p, "d_max", f"plan {p.get('id')}"),
        )
        for p in _require(data, "plans", "instance")
    )
    vehicles = tuple(
        Vehicle(
            id=_int_field(v, "id", "vehicle"),
            start_location=_int_field(v, "location", f"vehicle {v.get('id')}"),
            t_st=_int_field(v, "t_st", f"vehicle {v.get('id')}"),
        )
        for v in _require(data, "vehicles", "instance")
    )
    policy = policy_from_dict(data.get("policy", {"kind": "cost"}))
    return ChainingInstance(plans, vehicles, travel, policy)


# -- DARP instances ---------------------------------------------------------

def darp_instance_to_dict(instance: DarpInstance) -> dict:
    if isinstance(instance.fleet, AutoFleet):
        fleet = {"mode": "auto"}
    else:
        fleet = {
            "mode": "explicit",
            "vehicles": [
                {"id": v.id, "location": v.start_location, "t_st": v.t_st} for v in instance.fleet
            ],
        }
    return {
        "schema": DARP_INSTANCE_SCHEMA,
        "locations": {"count": instance.travel.size},
        "travel": _travel_to_dict(instance.travel),
        "requests": [
            {
                "id": r.id,
                "origin": r.origin,
                "destination": r.destination,
                "t_r": r.t_r,
                "max_delay": r.max_delay,
            }
            for r in instance.requests
        ],
        "capacity": instance.capacity,
        "fleet": fleet,
    }


def darp_instance_from_dict(data) -> DarpInstance:
    if data.get("schema") != DARP_INSTANCE_SCHEMA:
        raise InputError(f"expected schema {DARP_INSTANCE_SCHEMA}, got {data.get('schema')!r}")
    count = _int_field(_require(data, "locations", "instance"), "count", "locations")
    travel = _travel_from_dict(_require(data, "travel", "instance"), count)
    requests = tuple(
        Request(
            id=_int_field(r, "id", "request"),
            origin=_int_field(r, "origin", f"request {r.get('id')}"),
            destination=_int_field(r, "destination", f"request {r.get('id')}"),
            t_r=_int_field(r, "t_r", f"request {r.get('id')}"),
            max_delay=_int_field(r, "max_delay", f"request {r.get('id')}"),
        )
        for r in _require(data, "requests", "instance")
    )
    fleet_data = _require(data, "fleet", "instance")
    mode = _require(fleet_data, "mode", "fleet")
    if mode == "auto":
        fleet: tuple[Vehicle, ...] | AutoFleet = AUTO_FLEET
    elif mode == "explicit":
        fleet = tuple(
            Vehicle(
                id=_int_field(v, "id", "vehicle"),
                start_location=_int_field(v, "location", f"vehicle {v.get('id')}"),
                t_st=_int_field(v, "t_st", f"vehicle {v.get('id')}"),
            )
            for v in _require(fleet_data, "vehicles", "fleet")
        )
    else:
        raise InputError(f"fleet: unknown mode {mode!r}")
    return DarpInstance(requests, travel, _int_field(data, "capacity", "instance"), fleet)


def load_instance(path) -> ChainingInstance | DarpInstance:
    """Load either instance kind, fully validated."""
    data = load_json(path)
    if not isinstance(data, dict):
        raise InputError(f"{path}: top level must be an object")
    if "plans" in data and "requests" in data:
        raise InputError(f"{path}: exactly one of 'plans' or 'requests' may be present")
    schema = data.get("schema")
    if schema == CHAIN_INSTANCE_SCHEMA:
        return chain_instance_from_dict(data)
    if schema == DARP_INSTANCE_SCHEMA:
        return darp_instance_from_dict(data)
    raise InputError(f"{path}: unknown schema {schema!r}")


def save_instance(path, instance) -> None:
    if isinstance(instance, ChainingInstance):
        save_json(path, chain_instance_to_dict(instance))
    elif isinstance(instance, DarpInstance):
        save_json(path, darp_instance_to_dict(instance))
    else:
        raise InputError(f"cannot save {type(instance).__name__}")


# -- solutions --------------------------------------------------------------

def chain_solution_to_dict(solution: ChainSolution, policy: CostPolicy) -> dict:
    return {
        "schema": CHAIN_SOLUTION_SCHEMA,
        "policy": policy_to_dict(policy),
        "objective": solution.objective,
        "chains": [
            {
                "vehicle": chain.vehicle.id,
                "plans": [
                    {"plan": ref.plan_id, "delay": ref.delay, "cost": cost, "wait": wait}
                    for ref, cost, wait in zip(chain.elements, chain.link_costs, chain.link_waits)
                ],
            }
            for chain in solution.chains
        ],
        "stats": {
            "nodes_explored": solution.stats.nodes_explored,
            "relaxations_solved": solution.stats.relaxations_solved,
        },
    }


def chain_solution_chains_from_dict(data) -> list[tuple[int, list[tuple[int, int]]]]:
    """Extract (vehicle id, [(plan, delay), ...]) pairs for revalidation."""
    if data.get("schema") != CHAIN_SOLUTION_SCHEMA:
        raise InputError(f"expected schema {CHAIN_SOLUTION_SCHEMA}, got {data.get('schema')!r}")
    return [
        (int(c["vehicle"]), [(int(e["plan"]), int(e["delay"])) for e in c["plans"]])
        for c in data["chains"]
    ]


def darp_solution_to_dict(solution: DarpSolution) -> dict:
    return {
        "schema": DARP_SOLUTION_SCHEMA,
        "method": solution.method,
        "batch_len": solution.batch_len,
        "objective": solution.objective,
        "routes": [
            {
                "vehicle": {"id": v.id, "location": v.start_location, "t_st": v.t_st},
                "stops": [
                    {"request": s.request_id, "kind": s.kind, "location": s.location, "time": s.time}
                    for s in plan.stops
                ],
            }
            for v, plan in solution.routes
        ],
        "request_delays": [[rid, delay] for rid, delay in solution.request_delays],
    }


def darp_solution_from_dict(data) -> DarpSolution:
    if data.get("schema") != DARP_SOLUTION_SCHEMA:
        raise InputError(f"expected schema {DARP_SOLUTION_SCHEMA}, got {data.get('schema')!r}")
    routes = tuple(
        (
            Vehicle(route["vehicle"]["id"], route["vehicle"]["location"], route["vehicle"]["t_st"]),
            RoutePlan(
                tuple(
                    Stop(s["request"], s["kind"], s["location"], s["time"]) for s in route["stops"]
                )
            ),
        )
        for route in data["routes"]
    )
    return DarpSolution(
        method=data["method"],
        batch_len=data["batch_len"],
        routes=routes,
        objective=data["objective"],
        request_delays=tuple((rid, delay) for rid, delay in data["request_delays"]),
    )


# -- metric CSVs ------------------------------------------------------------

def metrics_csv_text(rows) -> str:
    """rows: (method, batch_len, total_cost, used_vehicles, comp_time_ms)."""
    lines = ["method,batch_len,total_cost,used_vehicles,comp_time_ms"]
    for method, batch_len, total_cost, used, comp_ms in rows:
        lines.append(f"{method},{'' if batch_len is None else batch_len},{total_cost},{used},{comp_ms}")
    return "\n".join(lines) + "\n"


def histogram_csv_text(pairs) -> str:
    lines = ["bucket,mass"]
    for bucket, mass in pairs:
        lines.append(f"{bucket},{mass}")
    return "\n".join(lines) + "\n"


def write_metrics_files(directory, solution: DarpSolution, metrics: Metrics, comp_time_ms: int) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "metrics.csv").write_text(
        metrics_csv_text(
            [(solution.method, solution.batch_len, metrics.total_cost, metrics.used_vehicles, comp_time_ms)]
        ),
        encoding="utf-8",
    )
    (directory / "occupancy.csv").write_text(histogram_csv_text(metrics.occupancy), encoding="utf-8")
    (directory / "delay.csv").write_text(histogram_csv_text(metrics.delays), encoding="utf-8")


# -- seeded random generation ------------------------------------------------

@dataclass(frozen=True)
class ChainGenParams:
    """Knobs for random chaining instances; same params + seed = same bytes."""

    seed: int
    plans: int = 5
    vehicles: int = 2
    locations: int = 6
    horizon: int = 60
    t_or_min: int = 0
    d_max_range: tuple[int, int] = (0, 10)
    extra_duration_range: tuple[int, int] = (0, 6)
    grid_size: int = 12
    t_st_max: int = 10
    fleet: str = "counted"  # counted | dedicated
    policy: CostPolicy = field(default_factory=TravelCost)

    def __post_init__(self) -> None:
        if min(self.plans, self.vehicles, self.locations, self.horizon) < 0:
            raise InputError("generator counts must be non-negative")
        if self.locations == 0 and (self.plans or self.vehicles):
            raise InputError("cannot place plans or vehicles without locations")
        if self.fleet not in ("counted", "dedicated"):
            raise InputError(f"unknown fleet mode {self.fleet!r}")


def generate_chain_instance(params: ChainGenParams) -> dict:
    """Random chaining instance as a schema dict, deterministic in the seed."""
    rng = random.Random(params.seed)
    coords = [(rng.randrange(params.grid_size), rng.randrange(params.grid_size)) for _ in range(params.locations)]
    travel = TravelMatrix.from_coordinates(coords)
    plans = []
    for i in range(1, params.plans + 1):
        origin = rng.randrange(params.locations)
        dest = rng.randrange(params.locations)
        t_or = rng.randint(min(params.t_or_min, params.horizon), params.horizon)
        t_de = t_or + travel.duration(origin, dest) + rng.randint(*params.extra_duration_range)
        plans.append(
            {
                "id": i,
                "origin": origin,
                "destination": dest,
                "t_or": t_or,
                "t_de": t_de,
                "d_max": rng.randint(*params.d_max_range),
            }
        )
    vehicles = []
    if params.fleet == "dedicated":
        for i, p in enumerate(plans, start=1):
            vehicles.append({"id": i, "location": p["origin"], "t_st": 0})
    else:
        for i in range(1, params.vehicles + 1):
            vehicles.append(
                {
                    "id": i,
                    "location": rng.randrange(params.locations),
                    "t_st": rng.randrange(params.t_st_max + 1),
                }
            )
    return {
        "schema": CHAIN_INSTANCE_SCHEMA,
        "locations": {"count": params.locations},
        "travel": {"grid": {"coordinates": [list(c) for c in coords], "ticks_per_unit": 1}},
        "plans": plans,
        "vehicles": vehicles,
        "policy": policy_to_dict(params.policy),
    }


def chain_instance_from_params(params: ChainGenParams) -> ChainingInstance:
    return chain_instance_from_dict(generate_chain_instance(params))


@dataclass(frozen=True)
class DarpGenParams:
    """Knobs for random DARP instances; same params + seed = same bytes."""

    seed: int
    requests: int = 8
    locations: int = 8
    horizon: int = 40
    delay_range: tuple[int, int] = (0, 15)
    capacity: int = 4
    fleet_size: int | None = None  # None selects the auto fleet
    grid_size: int = 10

    def __post_init__(self) -> None:
        if min(self.requests, self.locations, self.horizon) < 0 or self.capacity < 1:
            raise InputError("generator counts must be non-negative and capacity positive")
        if self.locations == 0 and self.requests:
            raise InputError("cannot place requests without locations")


def generate_darp_instance(params: DarpGenParams) -> dict:
    rng = random.Random(params.seed)
    coords = [(rng.randrange(params.grid_size), rng.randrange(params.grid_size)) for _ in range(params.locations)]
    requests = []
    for i in range(1, params.requests + 1):
        origin = rng.randrange(params.locations)
        dest = rng.randrange(params.locations)
        if params.locations > 1:
            while dest == origin:
                dest = rng.randrange(params.locations)
        requests.append(
            {
                "id": i,
                "origin": origin,
                "destination": dest,
                "t_r": rng.randrange(params.horizon + 1),
                "max_delay": rng.randint(*params.delay_range),
            }
        )
    if params.fleet_size is None:
        fleet = {"mode": "auto"}
    else:
        # vehicles idle where demand appears: one per request origin, extras random
        vehicles = []
        for i in range(1, params.fleet_size + 1):
            if i <= len(requests):
                loc = requests[i - 1]["origin"]
            else:
                loc = rng.randrange(params.locations)
            vehicles.append({"id": i, "location": loc, "t_st": 0})
        fleet = {"mode": "explicit", "vehicles": vehicles}
    return {
        "schema": DARP_INSTANCE_SCHEMA,
        "locations": {"count": params.locations},
        "travel": {"grid": {"coordinates": [list(c) for c in coords], "ticks_per_unit": 1}},
        "requests": requests,
        "capacity": params.capacity,
        "fleet": fleet,
    }


def darp_instance_from_params(params: DarpGenParams) -> DarpInstance:
    return darp_instance_from_dict(generate_darp_instance(params))
