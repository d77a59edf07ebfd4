"""Solved plans, feasibility checking and the EP / ATD indicators.

Clock semantics are per vehicle: a route leaves its owner's location at
time 0 (the owner's own household boards off the clock), every stop adds
the arc time plus ``t_p`` per person picked up, and the final arc reaches
the gathering place.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

from .instance import CARLESS, GATHERING, VEHICLE_OWNER, Instance

TIME_TOL = 1e-6


class UnknownId(KeyError):
    pass


class DegenerateInstance(ValueError):
    pass


class NoUsedVehicles(ValueError):
    pass


@dataclass(frozen=True)
class Stop:
    location: str
    pickup: int
    depart_time: float


@dataclass(frozen=True)
class Route:
    vehicle: str
    used: bool = False
    stops: tuple = ()
    destination: Optional[str] = None
    arrival_time: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "stops", tuple(self.stops))


@dataclass(frozen=True)
class Plan:
    routes: tuple
    evacuated_total: int

    def __post_init__(self):
        object.__setattr__(self, "routes", tuple(self.routes))

    def to_dict(self) -> dict:
        routes = []
        for r in self.routes:
            d = {
                "vehicle": r.vehicle,
                "used": r.used,
                "stops": [
                    {"location": s.location, "pickup": s.pickup, "depart_time": s.depart_time}
                    for s in r.stops
                ],
            }
            if r.destination is not None:
                d["destination"] = r.destination
            if r.arrival_time is not None:
                d["arrival_time"] = r.arrival_time
            routes.append(d)
        return {"routes": routes, "evacuated_total": self.evacuated_total}

    def to_json(self, indent: Optional[int] = None) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, doc: dict) -> "Plan":
        routes = []
        for r in doc["routes"]:
            stops = tuple(
                Stop(s["location"], int(s["pickup"]), float(s["depart_time"])) for s in r.get("stops", ())
            )
            arr = r.get("arrival_time")
            routes.append(
                Route(
                    vehicle=r["vehicle"],
                    used=bool(r["used"]),
                    stops=stops,
                    destination=r.get("destination"),
                    arrival_time=None if arr is None else float(arr),
                )
            )
        return cls(routes=tuple(routes), evacuated_total=int(doc["evacuated_total"]))

    @classmethod
    def from_json(cls, text: str) -> "Plan":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# construction helpers shared by every solver


def make_route(inst: Instance, vehicle: int, stops, destination: Optional[int]) -> Route:
    """Build a Route from location indices, computing the timestamps.

    ``stops`` is a sequence of ``(location_index, pickup)``; a ``None``
    destination makes an unused route.
    """
    locs = inst.locations
    if destination is None:
        return Route(vehicle=locs[vehicle].id)
    a = inst.arrays
    clock = 0.0
    prev = vehicle
    out = []
    for h, p in stops:
        clock = clock + a.tt[prev][h] + a.t_p * p
        out.append(Stop(locs[h].id, int(p), clock))
        prev = h
    arrival = clock + a.tt[prev][destination]
    return Route(
        vehicle=locs[vehicle].id,
        used=True,
        stops=tuple(out),
        destination=locs[destination].id,
        arrival_time=arrival,
    )


def make_plan(inst: Instance, routes) -> Plan:
    """Assemble a plan from routes; the evacuee count is derived."""
    routes = tuple(routes)
    idx = inst.index
    total = 0
    for r in routes:
        if r.used:
            total += inst.locations[idx[r.vehicle]].demand + sum(s.pickup for s in r.stops)
    return Plan(routes=routes, evacuated_total=total)


def empty_plan(inst: Instance) -> Plan:
    return make_plan(inst, [make_route(inst, k, (), None) for k in inst.owners])


def route_distance(inst: Instance, route: Route) -> float:
    if not route.used:
        return 0.0
    dd = inst.arrays.dd
    idx = inst.index
    nodes = [idx[route.vehicle]] + [idx[s.location] for s in route.stops] + [idx[route.destination]]
    return math.fsum(dd[a][b] for a, b in zip(nodes, nodes[1:]))


def total_distance(inst: Instance, plan: Plan) -> float:
    return math.fsum(route_distance(inst, r) for r in plan.routes)


def route_code(inst: Instance, route: Route) -> tuple:
    """Lexicographic encoding of a route on location indices.

    Unused routes encode as ``()``; a used route is one ``(1, stop, pickup)``
    token per stop followed by ``(0, destination)``.
    """
    if not route.used:
        return ()
    idx = inst.index
    toks = tuple((1, idx[s.location], s.pickup) for s in route.stops)
    return toks + ((0, idx[route.destination]),)


def canonical_key(inst: Instance, plan: Plan) -> tuple:
    """Sort key of the canonical tie-break: most evacuees, then least total
    distance, then smallest route encoding (vehicles in declaration order)."""
    idx = inst.index
    ordered = sorted(plan.routes, key=lambda r: idx[r.vehicle])
    return (
        -plan.evacuated_total,
        total_distance(inst, plan),
        tuple(route_code(inst, r) for r in ordered),
    )


# ---------------------------------------------------------------------------
# feasibility


@dataclass(frozen=True)
class PlanViolation:
    code: str
    vehicle: Optional[str] = None
    location: Optional[str] = None
    detail: str = ""

    def __str__(self):
        who = ",".join(x for x in (self.vehicle, self.location) if x is not None)
        who = f"({who})" if who else ""
        tail = f": {self.detail}" if self.detail else ""
        return f"{self.code}{who}{tail}"


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple = ()
    notes: tuple = ()  # warning-level observations, never make a plan infeasible

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def codes(self) -> set:
        return {v.code for v in self.violations}


def check_feasibility(inst: Instance, plan: Plan) -> FeasibilityReport:
    """Re-derive loads and clocks of every route and report breached constraints."""
    idx = inst.index
    locs = inst.locations
    a = inst.arrays

    for r in plan.routes:
        ids = [r.vehicle] + [s.location for s in r.stops]
        if r.destination is not None:
            ids.append(r.destination)
        for i in ids:
            if i not in idx:
                raise UnknownId(i)

    bad = []
    notes = []

    def report(code, vehicle=None, location=None, detail=""):
        bad.append(PlanViolation(code, vehicle, location, detail))

    seen_vehicles = set()
    picked = {}
    evacuated = 0
    for r in plan.routes:
        k = idx[r.vehicle]
        if locs[k].kind != VEHICLE_OWNER:
            report("NotAVehicle", r.vehicle, None, f"{r.vehicle} is {locs[k].kind}")
            continue
        if r.vehicle in seen_vehicles:
            report("DuplicateRoute", r.vehicle)
            continue
        seen_vehicles.add(r.vehicle)
        if not r.used:
            if r.stops or r.destination is not None:
                report("UnusedRouteNotEmpty", r.vehicle)
            continue
        if r.destination is None:
            report("MissingDestination", r.vehicle)
            continue
        dest = idx[r.destination]
        if locs[dest].kind != GATHERING:
            report("DestinationNotGathering", r.vehicle, r.destination)

        cap = locs[k].capacity
        load = locs[k].demand
        evacuated += load
        clock = 0.0
        prev = k
        visited = set()
        over_capacity = False
        for s in r.stops:
            h = idx[s.location]
            if locs[h].kind != CARLESS:
                report("StopNotCarless", r.vehicle, s.location)
            if h in visited:
                report("RevisitedLocation", r.vehicle, s.location)
            visited.add(h)
            if s.pickup < 0:
                report("NegativePickup", r.vehicle, s.location, f"pickup {s.pickup}")
            elif s.pickup == 0:
                notes.append(PlanViolation("ZeroPickup", r.vehicle, s.location))
            load += s.pickup
            evacuated += s.pickup
            picked[s.location] = picked.get(s.location, 0) + s.pickup
            if load > cap and not over_capacity:
                over_capacity = True
                report("CapacityExceeded", r.vehicle, s.location, f"load {load} > capacity {cap}")
            clock = clock + a.tt[prev][h] + a.t_p * s.pickup
            if abs(clock - s.depart_time) > TIME_TOL:
                report(
                    "TimestampMismatch",
                    r.vehicle,
                    s.location,
                    f"depart_time {s.depart_time} != recomputed {clock}",
                )
            prev = h
        arrival = clock + a.tt[prev][dest]
        if r.arrival_time is None or abs(arrival - r.arrival_time) > TIME_TOL:
            report(
                "TimestampMismatch",
                r.vehicle,
                r.destination,
                f"arrival_time {r.arrival_time} != recomputed {arrival}",
            )
        if arrival > a.t_max + TIME_TOL:
            report("DeadlineViolated", r.vehicle, r.destination, f"{arrival} > {a.t_max}")

    for k in inst.owners:
        if locs[k].id not in seen_vehicles:
            report("MissingRoute", locs[k].id)

    for loc_id, total in picked.items():
        d = locs[idx[loc_id]].demand
        if total > d:
            report("DemandExceeded", None, loc_id, f"{total} > {d}")

    if evacuated != plan.evacuated_total:
        report("EvacuatedTotalMismatch", None, None, f"stored {plan.evacuated_total} != recomputed {evacuated}")

    return FeasibilityReport(tuple(bad), tuple(notes))


# ---------------------------------------------------------------------------
# indicators


def evacuation_percentage(inst: Instance, plan: Plan) -> float:
    """Evacuated persons as a fraction of all persons in R and H."""
    total = inst.total_demand
    if total == 0:
        raise DegenerateInstance("total demand is zero")
    return plan.evacuated_total / total


def average_travel_distance(inst: Instance, plan: Plan) -> float:
    """Mean route length in miles over used vehicles only."""
    used = [r for r in plan.routes if r.used]
    if not used:
        raise NoUsedVehicles("no vehicle is used")
    return math.fsum(route_distance(inst, r) for r in used) / len(used)
