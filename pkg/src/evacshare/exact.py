"""Depth-first branch and bound for desk-scale instances.

Vehicles are routed one after another in declaration order.  A node either
decides whether the next vehicle is used, or extends the open route by a
``(carless location, pickup)`` stop, or closes it at the closest reachable
gathering place.

The search runs in two phases.  The first finds the optimal number of
evacuees, pruning any node whose bound does not beat the incumbent.  The
second fixes that optimum and walks the tree in route-encoding order to
find the canonical plan (least total distance, then smallest encoding), so
the reported plan matches the exhaustive oracle exactly.
"""

from __future__ import annotations

import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional

from . import _kernels
from .instance import Instance
from .heuristic import solve_heuristic
from .plan import Plan, canonical_key, make_plan, make_route

OPTIMAL = "optimal"
LIMIT_REACHED = "limit_reached"

_DIST_TOL = 1e-9
_TABLE_CAP = 2_000_000  # transposition entries kept per search


@dataclass(frozen=True)
class ExactConfig:
    time_limit: float = 60.0
    node_limit: int = 10_000_000
    workers: int = 1
    # skip the canonicalisation phase (objective and some optimal plan only)
    canonical: bool = True


@dataclass(frozen=True)
class ExactResult:
    plan: Plan
    status: str
    best_bound: int
    nodes: int
    seconds: float

    @property
    def objective(self) -> int:
        return self.plan.evacuated_total

    def status_record(self) -> dict:
        return {
            "status": self.status,
            "objective": self.objective,
            "best_bound": self.best_bound,
            "nodes": self.nodes,
            "seconds": round(self.seconds, 6),
        }


class Node(NamedTuple):
    k: int  # position of the current vehicle in the owner list
    open: bool  # a route of vehicle k is in progress
    cur: int  # location index of the open route's last node
    load: int
    clock: float
    rdist: float  # distance of the open route so far
    stops: tuple  # ((h, p), ...) of the open route
    visited: int  # bitmask over carless positions on the open route
    res: tuple  # residual demand per carless position
    evac: int
    routes: tuple  # closed routes: None or (stops, dest)
    dist: float  # distance of closed routes


class _Abort(Exception):
    pass


class _Tree:
    """Static data and node expansion, shared by all workers."""

    def __init__(self, inst: Instance):
        a = inst.arrays
        self.inst = inst
        self.a = a
        self.R = list(a.owners)
        self.H = list(a.carless)
        self.S = list(a.gathering)
        self.nR = len(self.R)
        self.nH = len(self.H)
        tt, dd = a.tt, a.dd
        self.tt, self.dd = tt, dd
        self.t_p, self.t_max = a.t_p, a.t_max
        sp = _kernels.shortest_paths(inst.time_matrix).tolist()
        spd = _kernels.shortest_paths(inst.distance_matrix).tolist()
        self.sp = sp
        n = len(inst.locations)
        self.min_s_sp = [min(sp[i][s] for s in self.S) for i in range(n)]
        self.min_s_spd = [min(spd[i][s] for s in self.S) for i in range(n)]
        # gathering places of every node ordered by (distance, index)
        self.s_by_dist = [sorted(self.S, key=lambda s, i=i: (dd[i][s], s)) for i in range(n)]
        # cheapest arc out of each owner or carless location into H or S
        self.min_out = [0.0] * n
        for i in self.R + self.H:
            self.min_out[i] = min((dd[i][j] for j in self.H + self.S if j != i), default=0.0)
        self.cap = [a.capacity[r] for r in self.R]
        self.own = [a.demand[r] for r in self.R]

        # static reachability of each vehicle from its start at clock 0
        self.can_finish = [self.min_s_sp[r] <= self.t_max for r in self.R]
        self.reach = []
        self.time_cap = []
        for r in self.R:
            mask, tc = self._reach(r, 0.0)
            self.reach.append(mask)
            self.time_cap.append(tc)
        self.own_suffix = [0] * (self.nR + 1)
        for k in range(self.nR - 1, -1, -1):
            self.own_suffix[k] = self.own_suffix[k + 1] + (self.own[k] if self.can_finish[k] else 0)

    def _reach(self, cur, clock, visited=0):
        """Carless positions still visitable from ``cur`` at ``clock`` and the
        most persons that can still board before the deadline."""
        mask = 0
        best = math.inf
        sp, tail, t_max, t_p = self.sp, self.min_s_sp, self.t_max, self.t_p
        for i, h in enumerate(self.H):
            if visited >> i & 1:
                continue
            need = sp[cur][h] + tail[h]
            if clock + need + t_p <= t_max + 1e-9:
                mask |= 1 << i
                if need < best:
                    best = need
        if not mask:
            return 0, 0
        if t_p <= 0:
            return mask, 1 << 60
        return mask, int(math.floor((t_max - clock - best) / t_p + 1e-9))

    def root(self) -> Node:
        res = tuple(self.a.demand[h] for h in self.H)
        return Node(0, False, -1, 0, 0.0, 0.0, (), 0, res, 0, (), 0.0)

    def bound(self, node: Node, skip_h: int = -1, skip_k: int = -1) -> int:
        """Upper bound on the evacuees of any completion of ``node``; the
        optional arguments forbid carless position ``skip_h`` or vehicle
        ``skip_k`` from the rest of the search."""
        res = node.res
        if skip_h >= 0:
            res = res[:skip_h] + (0,) + res[skip_h + 1 :]
        pot = 0
        union = 0
        k_next = node.k
        if node.open:
            k_next += 1
            mask, tc = self._reach(node.cur, node.clock, node.visited)
            avail = sum(res[i] for i in range(self.nH) if mask >> i & 1)
            pot += min(self.cap[node.k] - node.load, tc, avail)
            union |= mask
        own_rest = self.own_suffix[k_next]
        for j in range(k_next, self.nR):
            if not self.can_finish[j]:
                continue
            if j == skip_k:
                own_rest -= self.own[j]
                continue
            mask = self.reach[j]
            avail = sum(res[i] for i in range(self.nH) if mask >> i & 1)
            pot += min(self.cap[j] - self.own[j], self.time_cap[j], avail)
            union |= mask
        total = sum(res[i] for i in range(self.nH) if union >> i & 1)
        return node.evac + own_rest + min(pot, total)

    def dist_lb(self, node: Node, target: Optional[int] = None) -> float:
        """Lower bound on the total distance of completions of ``node``.

        With ``target`` given, every carless location and vehicle without
        which the bound drops below ``target`` must still be left along its
        cheapest outgoing arc.
        """
        if target is None:
            if node.open:
                return node.dist + node.rdist + self.min_s_spd[node.cur]
            return node.dist
        extra = []
        for i, h in enumerate(self.H):
            if node.res[i] > 0 and not (node.open and node.visited >> i & 1):
                if self.bound(node, skip_h=i) < target:
                    extra.append(self.min_out[h])
        first = node.k + 1 if node.open else node.k
        for j in range(first, self.nR):
            if self.can_finish[j] and self.bound(node, skip_k=j) < target:
                extra.append(self.min_out[self.R[j]])
        if not node.open:
            return node.dist + math.fsum(extra)
        # the open route's own tail may pass through forced locations
        tail = max(self.min_s_spd[node.cur], self.min_out[node.cur] + math.fsum(extra))
        return node.dist + node.rdist + tail

    def close_dest(self, node: Node) -> Optional[int]:
        row = self.tt[node.cur]
        for s in self.s_by_dist[node.cur]:
            if node.clock + row[s] <= self.t_max:
                return s
        return None

    def children(self, node: Node, canonical: bool):
        """Child nodes; canonical mode yields them in route-encoding order."""
        if not node.open:
            k = node.k
            unused = node._replace(k=k + 1, routes=node.routes + (None,))
            kids = []
            if self.can_finish[k]:
                r = self.R[k]
                kids.append(
                    node._replace(
                        open=True,
                        cur=r,
                        load=self.own[k],
                        clock=0.0,
                        rdist=0.0,
                        stops=(),
                        visited=0,
                        evac=node.evac + self.own[k],
                    )
                )
            return [unused] + kids if canonical else kids + [unused]

        kids = []
        s = self.close_dest(node)
        if s is not None:
            kids.append(
                node._replace(
                    k=node.k + 1,
                    open=False,
                    cur=-1,
                    routes=node.routes + ((node.stops, s),),
                    dist=node.dist + node.rdist + self.dd[node.cur][s],
                    stops=(),
                )
            )
        spare = self.cap[node.k] - node.load
        cur = node.cur
        tt_row, dd_row = self.tt[cur], self.dd[cur]
        for i, h in enumerate(self.H):
            if node.visited >> i & 1 or node.res[i] <= 0:
                continue
            top = min(node.res[i], spare)
            if top <= 0:
                continue
            arrive = node.clock + tt_row[h]
            tail = self.min_s_sp[h]
            # pickups allowed by the deadline, then by demand and seats
            room = self.t_max - arrive - tail
            if room < self.t_p - 1e-9:
                continue
            if self.t_p > 0:
                top = min(top, int(math.floor(room / self.t_p + 1e-9)))
            if canonical:
                order = range(1, top + 1)
            else:
                order = [top] + ([1] if top > 1 else []) + list(range(top - 1, 1, -1))
            for p in order:
                res = list(node.res)
                res[i] -= p
                kids.append(
                    node._replace(
                        cur=h,
                        load=node.load + p,
                        clock=arrive + self.t_p * p,
                        rdist=node.rdist + dd_row[h],
                        stops=node.stops + ((h, p),),
                        visited=node.visited | (1 << i),
                        res=tuple(res),
                        evac=node.evac + p,
                    )
                )
        return kids

    def priority(self, parent: Node, child: Node) -> float:
        """Greedy order among equal bounds: cheapest minutes per person first,
        closing a route last."""
        if not parent.open:
            return 0.0 if child.open else 1.0
        if not child.open:
            return math.inf
        p = child.load - parent.load
        return (child.clock - parent.clock) / p

    def routes_of(self, plan: Plan) -> tuple:
        """Inverse of :meth:`plan_of`."""
        idx = self.inst.index
        by_vehicle = {idx[r.vehicle]: r for r in plan.routes}
        out = []
        for r in self.R:
            route = by_vehicle.get(r)
            if route is None or not route.used:
                out.append(None)
            else:
                stops = tuple((idx[s.location], s.pickup) for s in route.stops)
                out.append((stops, idx[route.destination]))
        return tuple(out)

    def plan_of(self, routes) -> Plan:
        out = []
        for k, route in enumerate(routes):
            if route is None:
                out.append(make_route(self.inst, self.R[k], (), None))
            else:
                stops, s = route
                out.append(make_route(self.inst, self.R[k], stops, s))
        return make_plan(self.inst, out)


class _Shared:
    """Incumbent and counters shared by the workers of one solve."""

    def __init__(self, limits: ExactConfig, start: float):
        self.lock = threading.Lock()
        self.nodes = 0
        self.node_limit = limits.node_limit
        self.deadline = start + limits.time_limit
        self.aborted = False
        self.best_evac = 0
        self.best_routes = None  # set to the all-unused plan by the caller
        self.open_bound = -1  # largest bound left unexplored by an abort
        self.table = {}
        # canonical phase
        self.best_key = None

    def tick(self):
        self.nodes += 1
        if self.nodes >= self.node_limit or (self.nodes & 1023 == 0 and time.perf_counter() > self.deadline):
            self.aborted = True
        if self.aborted:
            raise _Abort

    def note_open(self, b):
        with self.lock:
            if b > self.open_bound:
                self.open_bound = b


def _state(node: Node):
    """Everything the subtree below ``node`` depends on, except the clock and
    the distance travelled."""
    return (node.k, node.open, node.cur, node.visited, node.res, node.load, node.evac)


def _phase1(tree: _Tree, shared: _Shared, node: Node):
    shared.tick()
    if node.k == tree.nR:
        with shared.lock:
            if node.evac > shared.best_evac:
                shared.best_evac = node.evac
                shared.best_routes = node.routes
        return
    # an identical state reached no later has already been searched
    key = _state(node)
    seen = shared.table.get(key)
    if seen is not None and seen <= node.clock:
        return
    if seen is not None or len(shared.table) < _TABLE_CAP:
        shared.table[key] = node.clock

    kids = []
    for i, c in enumerate(tree.children(node, canonical=False)):
        kids.append((tree.bound(c), tree.priority(node, c), i, c))
    kids.sort(key=lambda t: (-t[0], t[1], t[2]))
    for pos, (b, _, _, child) in enumerate(kids):
        if b <= shared.best_evac:
            break
        try:
            _phase1(tree, shared, child)
        except _Abort:
            shared.note_open(max(t[0] for t in kids[pos:]))
            raise


def _leaf_key(tree: _Tree, routes):
    plan = tree.plan_of(routes)
    return canonical_key(tree.inst, plan)


def _phase2(tree: _Tree, shared: _Shared, node: Node, target: int, local: list, table: dict):
    """Canonical search among plans evacuating ``target`` persons.

    ``local`` holds ``[key, routes]`` of the best leaf found by this worker;
    children are visited in encoding order, so a later leaf with an equal
    distance never wins within one worker.
    """
    shared.tick()
    if node.k == tree.nR:
        if node.evac != target:
            return
        key = _leaf_key(tree, node.routes)
        if local[0] is None or key < local[0]:
            local[0], local[1] = key, node.routes
            with shared.lock:
                if shared.best_key is None or key < shared.best_key:
                    shared.best_key = key
        return
    # an equal state reached earlier in encoding order, no later and no
    # longer, leads to an equal-or-better completion with a smaller encoding
    key = _state(node)
    here = node.dist + node.rdist
    front = table.get(key)
    if front is not None:
        for c, d in front:
            if c <= node.clock and d <= here:
                return
        if len(front) < 8:
            front.append((node.clock, here))
    elif len(table) < _TABLE_CAP:
        table[key] = [(node.clock, here)]
    for child in tree.children(node, canonical=True):
        if tree.bound(child) < target:
            continue
        # near-ties stay open: the leaf keys decide them exactly
        best = shared.best_key
        cut = math.inf if best is None else best[1] + _DIST_TOL
        if local[0] is not None:
            cut = min(cut, local[0][1] + _DIST_TOL - 1e-300)
        if tree.dist_lb(child) > cut or tree.dist_lb(child, target) > cut:
            continue
        _phase2(tree, shared, child, target, local, table)


def _frontier(tree: _Tree, root: Node, size: int, canonical: bool):
    """Expand level by level until at least ``size`` subtrees exist; list
    order stays in depth-first order."""
    nodes = [root]
    while len(nodes) < size:
        grown = []
        for n in nodes:
            grown.extend(tree.children(n, canonical) if n.k < tree.nR else [n])
        if grown == nodes:
            break
        nodes = grown
    return nodes


def solve_exact(inst: Instance, config: ExactConfig = ExactConfig()) -> ExactResult:
    """Solve to proven optimality, or report the incumbent and an upper bound
    when a node or time limit stops the search."""
    start = time.perf_counter()
    tree = _Tree(inst)
    shared = _Shared(config, start)
    root = tree.root()
    root_bound = tree.bound(root)
    workers = max(1, int(config.workers))
    # a local-search plan is the starting incumbent of both phases
    warm = solve_heuristic(inst)
    shared.best_evac = warm.evacuated_total
    shared.best_routes = tree.routes_of(warm)

    # phase 1: optimal objective
    try:
        if workers == 1:
            _phase1(tree, shared, root)
        else:
            subtrees = _frontier(tree, root, 4 * workers, canonical=False)

            def run(n):
                try:
                    _phase1(tree, shared, n)
                except _Abort:
                    shared.note_open(tree.bound(n))

            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(run, subtrees))
            if shared.aborted:
                raise _Abort
    except _Abort:
        plan = tree.plan_of(shared.best_routes)
        # nothing noted means the root itself was never expanded
        bound = root_bound if shared.open_bound < 0 else min(shared.open_bound, root_bound)
        bound = max(bound, plan.evacuated_total)
        return ExactResult(plan, LIMIT_REACHED, bound, shared.nodes, time.perf_counter() - start)

    target = shared.best_evac
    fallback = tree.plan_of(shared.best_routes)
    if not config.canonical:
        return ExactResult(fallback, OPTIMAL, target, shared.nodes, time.perf_counter() - start)

    # phase 2: canonical plan at that objective
    shared.best_key = canonical_key(inst, fallback)
    if warm.evacuated_total == target:
        warm_key = canonical_key(inst, warm)
        if warm_key < shared.best_key:
            shared.best_key, shared.best_routes = warm_key, tree.routes_of(warm)
    seed_key = shared.best_key
    subtrees = [root] if workers == 1 else _frontier(tree, root, 4 * workers, canonical=True)
    results = [[None, None] for _ in subtrees]
    try:
        if workers == 1:
            _phase2(tree, shared, root, target, results[0], {})
        else:

            def run2(i):
                n = subtrees[i]
                if tree.bound(n) >= target:
                    _phase2(tree, shared, n, target, results[i], {})

            with ThreadPoolExecutor(max_workers=workers) as pool:
                for f in [pool.submit(run2, i) for i in range(len(subtrees))]:
                    f.result()
    except _Abort:
        # optimum is proven; only the tie-break was cut short
        return ExactResult(fallback, LIMIT_REACHED, target, shared.nodes, time.perf_counter() - start)

    best_key, best_routes = seed_key, shared.best_routes
    for key, routes in results:
        if key is not None and key < best_key:
            best_key, best_routes = key, routes
    plan = tree.plan_of(best_routes)
    return ExactResult(plan, OPTIMAL, target, shared.nodes, time.perf_counter() - start)
