"""Greedy construction and first-improvement local search.

Both work on a light internal representation: per vehicle either ``None``
(unused) or ``[stops, dest]`` with ``stops`` a list of ``[h, pickup]`` on
location indices.  Plans are ordered lexicographically by (evacuees,
-total distance); every candidate is checked for capacity, demand and
deadline before it can be accepted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .instance import Instance
from .plan import Plan, check_feasibility, make_plan, make_route

EPS = 1e-9

NEIGHBORHOODS = ("relocate_pickup", "swap_pickups", "intra_route_2opt", "change_destination")


class InfeasibleStart(ValueError):
    pass


@dataclass(frozen=True)
class LocalSearchConfig:
    max_iterations: int = 1000
    neighborhoods: tuple = NEIGHBORHOODS
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        unknown = set(self.neighborhoods) - set(NEIGHBORHOODS)
        if unknown:
            raise ValueError(f"unknown neighborhoods: {sorted(unknown)}")


class _Ctx:
    def __init__(self, inst: Instance):
        a = inst.arrays
        self.inst = inst
        self.a = a
        self.tt, self.dd = a.tt, a.dd
        self.t_p, self.t_max = a.t_p, a.t_max
        self.R = list(a.owners)
        self.H = list(a.carless)
        self.S = list(a.gathering)
        n = len(inst.locations)
        self.s_by_dist = [sorted(self.S, key=lambda s, i=i: (self.dd[i][s], s)) for i in range(n)]
        self.tt_np = inst.time_matrix

    def path_clock(self, k, stops):
        clock = 0.0
        prev = k
        for h, p in stops:
            clock = clock + self.tt[prev][h] + self.t_p * p
            prev = h
        return clock, prev

    def best_dest(self, clock, last):
        for s in self.s_by_dist[last]:
            if clock + self.tt[last][s] <= self.t_max:
                return s
        return None

    def route_ok(self, k, stops, dest):
        if sum(p for _, p in stops) + self.a.demand[k] > self.a.capacity[k]:
            return False
        clock, last = self.path_clock(k, stops)
        return clock + self.tt[last][dest] <= self.t_max

    def settle(self, k, stops):
        """Closest feasible destination for a stop list, or None."""
        if sum(p for _, p in stops) + self.a.demand[k] > self.a.capacity[k]:
            return None
        clock, last = self.path_clock(k, stops)
        return self.best_dest(clock, last)

    def route_dist(self, k, route):
        if route is None:
            return 0.0
        stops, dest = route
        nodes = [k] + [h for h, _ in stops] + [dest]
        return math.fsum(self.dd[a][b] for a, b in zip(nodes, nodes[1:]))

    def score(self, routes):
        evac = 0
        for k, route in zip(self.R, routes):
            if route is not None:
                evac += self.a.demand[k] + sum(p for _, p in route[0])
        dist = math.fsum(self.route_dist(k, r) for k, r in zip(self.R, routes))
        return evac, -dist

    def residual(self, routes):
        res = {h: self.a.demand[h] for h in self.H}
        for route in routes:
            if route is not None:
                for h, p in route[0]:
                    res[h] -= p
        return res

    def to_plan(self, routes) -> Plan:
        out = []
        for k, route in zip(self.R, routes):
            if route is None:
                out.append(make_route(self.inst, k, (), None))
            else:
                out.append(make_route(self.inst, k, [tuple(s) for s in route[0]], route[1]))
        return make_plan(self.inst, out)

    def from_plan(self, plan: Plan):
        idx = self.inst.index
        by_vehicle = {idx[r.vehicle]: r for r in plan.routes}
        routes = []
        for k in self.R:
            r = by_vehicle.get(k)
            if r is None or not r.used:
                routes.append(None)
            else:
                routes.append([[[idx[s.location], s.pickup] for s in r.stops], idx[r.destination]])
        return routes


def _better(a, b):
    """Strict lexicographic improvement with a tolerance on distance."""
    if a[0] != b[0]:
        return a[0] > b[0]
    return a[1] > b[1] + EPS


# ---------------------------------------------------------------------------
# greedy


def _greedy_routes(ctx: _Ctx):
    a = ctx.a
    order = sorted(range(len(ctx.R)), key=lambda i: (-a.capacity[ctx.R[i]], i))
    res = {h: a.demand[h] for h in ctx.H}
    routes = [None] * len(ctx.R)
    for i in order:
        k = ctx.R[i]
        stops = []
        dest = ctx.best_dest(0.0, k)
        if dest is None:
            continue
        load = a.demand[k]
        while True:
            cands = [h for h in ctx.H if res[h] > 0 and all(h != s for s, _ in stops)]
            spare = a.capacity[k] - load
            if not cands or spare <= 0:
                break
            path = [k] + [h for h, _ in stops]
            times = _kernels.insertion_times(np.array(path), np.array(cands), ctx.tt_np)
            carried = load - a.demand[k]
            old_clock, old_last = ctx.path_clock(k, stops)
            old_arrival = old_clock + ctx.tt[old_last][dest]
            best = None
            for c, h in enumerate(cands):
                for q in range(len(path)):
                    last = h if q == len(path) - 1 else path[-1]
                    for p in range(min(res[h], spare), 0, -1):
                        clock = times[c, q] + ctx.t_p * (carried + p)
                        s = ctx.best_dest(clock, last)
                        if s is None:
                            continue
                        gain = p / (max(clock + ctx.tt[last][s] - old_arrival, 0.0) + EPS)
                        if best is None or gain > best[0] + 1e-12:
                            # the kernel sums legs in another order; confirm exactly
                            trial = [list(x) for x in stops]
                            trial.insert(q, [h, p])
                            if ctx.settle(k, trial) is not None:
                                best = (gain, h, q, p, s)
            if best is None:
                break
            _, h, q, p, s = best
            stops.insert(q, [h, p])
            res[h] -= p
            load += p
            dest = s
        # re-derive the clock-consistent destination after the last insertion
        dest = ctx.settle(k, stops)
        if load == 0:
            continue  # nobody to move; leave the vehicle home
        routes[i] = [stops, dest]
    return routes


def greedy_construct(inst: Instance) -> Plan:
    """Build routes vehicle by vehicle (largest capacity first), inserting the
    pickup with the best evacuees-per-added-minute ratio until nothing fits."""
    ctx = _Ctx(inst)
    return ctx.to_plan(_greedy_routes(ctx))


# ---------------------------------------------------------------------------
# local search moves
#
# Each generator yields candidate route lists in a fixed scan order; the
# caller accepts the first strict improvement.


def _copy(routes):
    return [None if r is None else [[list(s) for s in r[0]], r[1]] for r in routes]


def _relocate_pickup(ctx: _Ctx, routes, h_order):
    res = ctx.residual(routes)
    for b, kb in enumerate(ctx.R):
        for h in h_order:
            sources = []
            if res[h] > 0:
                sources.append((None, res[h]))
            for a_, ra in enumerate(routes):
                if a_ != b and ra is not None:
                    for pos, (hh, p) in enumerate(ra[0]):
                        if hh == h:
                            sources.append(((a_, pos), p))
            for src, avail in sources:
                rb = routes[b]
                stops_b = [] if rb is None else rb[0]
                at = next((i for i, (hh, _) in enumerate(stops_b) if hh == h), None)
                positions = [at] if at is not None else range(len(stops_b) + 1)
                for pos in positions:
                    for q in range(avail, 0, -1):
                        new = _copy(routes)
                        if new[b] is None:
                            new[b] = [[], None]
                        nb = new[b][0]
                        if at is not None:
                            nb[at][1] += q
                        else:
                            nb.insert(pos, [h, q])
                        dest_b = ctx.settle(kb, nb)
                        if dest_b is None:
                            continue
                        new[b][1] = dest_b
                        if src is not None:
                            a_, spos = src
                            sa = new[a_][0]
                            sa[spos][1] -= q
                            if sa[spos][1] == 0:
                                del sa[spos]
                            dest_a = ctx.settle(ctx.R[a_], sa)
                            if dest_a is None:
                                continue
                            new[a_][1] = dest_a
                        yield new
                        break  # largest feasible amount only


def _swap_pickups(ctx: _Ctx, routes, h_order):
    n = len(routes)
    for a_ in range(n):
        ra = routes[a_]
        if ra is None:
            continue
        for b in range(a_ + 1, n):
            rb = routes[b]
            if rb is None:
                continue
            for i, (ha, pa) in enumerate(ra[0]):
                for j, (hb, pb) in enumerate(rb[0]):
                    if ha == hb:
                        continue
                    if any(h == hb for h, _ in ra[0]) or any(h == ha for h, _ in rb[0]):
                        continue
                    new = _copy(routes)
                    new[a_][0][i] = [hb, pb]
                    new[b][0][j] = [ha, pa]
                    da = ctx.settle(ctx.R[a_], new[a_][0])
                    db = ctx.settle(ctx.R[b], new[b][0])
                    if da is None or db is None:
                        continue
                    new[a_][1], new[b][1] = da, db
                    yield new


def _two_opt(ctx: _Ctx, routes, h_order):
    for b, rb in enumerate(routes):
        if rb is None or len(rb[0]) < 2:
            continue
        m = len(rb[0])
        for i in range(m - 1):
            for j in range(i + 1, m):
                new = _copy(routes)
                st = new[b][0]
                st[i : j + 1] = st[i : j + 1][::-1]
                d = ctx.settle(ctx.R[b], st)
                if d is None:
                    continue
                new[b][1] = d
                yield new


def _change_destination(ctx: _Ctx, routes, h_order):
    for b, rb in enumerate(routes):
        k = ctx.R[b]
        if rb is None:
            d = ctx.settle(k, [])
            if d is not None:
                new = _copy(routes)
                new[b] = [[], d]
                yield new
            continue
        for s in ctx.S:
            if s != rb[1] and ctx.route_ok(k, rb[0], s):
                new = _copy(routes)
                new[b][1] = s
                yield new


_MOVES = {
    "relocate_pickup": _relocate_pickup,
    "swap_pickups": _swap_pickups,
    "intra_route_2opt": _two_opt,
    "change_destination": _change_destination,
}


def _descend(ctx, routes, config, h_order, budget, on_accept):
    """First-improvement descent; returns (routes, moves used)."""
    current = ctx.score(routes)
    used = 0
    while used < budget:
        improved = False
        for name in config.neighborhoods:
            for cand in _MOVES[name](ctx, routes, h_order):
                sc = ctx.score(cand)
                if _better(sc, current):
                    routes, current = cand, sc
                    used += 1
                    improved = True
                    if on_accept is not None:
                        on_accept(ctx.to_plan(routes))
                    break
            if improved:
                break
        if not improved:
            break
    return routes, used


def _restart(ctx, routes):
    """Force the largest unserved demand in by ejecting the smallest pickup."""
    res = ctx.residual(routes)
    unserved = [h for h in ctx.H if res[h] > 0]
    if not unserved:
        return None
    target = max(unserved, key=lambda h: (res[h], -h))
    smallest = None
    for b, rb in enumerate(routes):
        if rb is None:
            continue
        for pos, (h, p) in enumerate(rb[0]):
            if h != target and (smallest is None or p < smallest[0]):
                smallest = (p, b, pos)
    if smallest is None:
        return None
    _, b, pos = smallest
    new = _copy(routes)
    stops = new[b][0]
    del stops[pos]
    k = ctx.R[b]
    if any(h == target for h, _ in stops):
        return None
    best = None
    for q in range(len(stops) + 1):
        for p in range(res[target], 0, -1):
            trial = [list(s) for s in stops]
            trial.insert(q, [target, p])
            d = ctx.settle(k, trial)
            if d is not None:
                cand = _copy(new)
                cand[b] = [trial, d]
                sc = ctx.score(cand)
                if best is None or _better(sc, best[0]):
                    best = (sc, cand)
                break
    return None if best is None else best[1]


def local_search(inst: Instance, start: Plan, config: LocalSearchConfig = LocalSearchConfig(), on_accept=None) -> Plan:
    """Improve ``start`` by first-improvement moves until a full pass finds
    nothing or ``config.max_iterations`` moves have been accepted.

    ``on_accept`` is called with every accepted intermediate plan.
    """
    report = check_feasibility(inst, start)
    if not report.ok:
        raise InfeasibleStart("; ".join(str(v) for v in report.violations))
    if config.max_iterations == 0:
        return start
    ctx = _Ctx(inst)
    rng = np.random.default_rng(config.seed)
    h_order = [ctx.H[i] for i in rng.permutation(len(ctx.H))]

    routes = ctx.from_plan(start)
    routes, used = _descend(ctx, routes, config, h_order, config.max_iterations, on_accept)
    best = routes
    if used < config.max_iterations:
        kicked = _restart(ctx, routes)
        if kicked is not None:
            kicked, _ = _descend(ctx, kicked, config, h_order, config.max_iterations - used - 1, None)
            if _better(ctx.score(kicked), ctx.score(best)):
                best = kicked
                if on_accept is not None:
                    on_accept(ctx.to_plan(best))
    if best is routes and not _better(ctx.score(routes), ctx.score(ctx.from_plan(start))):
        return start
    return ctx.to_plan(best)


def solve_heuristic(inst: Instance, config: LocalSearchConfig = LocalSearchConfig()) -> Plan:
    return local_search(inst, greedy_construct(inst), config)
