"""Exhaustive reference solver for tiny instances.

Every vehicle's feasible routes are listed in full: each ordered subset of
carless locations as the stop sequence, each gathering place as the
destination and each integral pickup vector.  Because every vehicle keeps
its own clock, a route's feasibility does not depend on the other vehicles;
they interact only through the demand left at each carless location.  The
joint choice is therefore enumerated over residual-demand vectors, one
vehicle at a time, with the best continuation of each vector memoised.  This
covers exactly the same joint combinations as a nested loop over all
vehicles, at a fraction of the cost.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .instance import Instance
from .plan import Plan, make_plan, make_route


class LimitExceeded(ValueError):
    pass


@dataclass(frozen=True)
class OracleLimits:
    max_vehicles: int = 3
    max_carless: int = 4


def vehicle_routes(inst: Instance, k: int):
    """All feasible single-vehicle routes of owner ``k``.

    Returns ``(code, stops, dest, evacuees, distance)`` tuples sorted by code;
    the unused route ``()`` is always first.
    """
    a = inst.arrays
    cap = a.capacity[k]
    own = a.demand[k]
    spare = cap - own
    out = [((), (), None, 0, 0.0)]
    for s in a.gathering:
        if a.tt[k][s] <= a.t_max:
            out.append((((0, s),), (), s, own, a.dd[k][s]))
    usable = [h for h in a.carless if a.demand[h] > 0]
    for n in range(1, min(len(usable), spare) + 1):
        for seq in itertools.permutations(usable, n):
            dist = 0.0
            prev = k
            for h in seq:
                dist += a.dd[prev][h]
                prev = h
            last = prev
            ranges = [range(1, min(a.demand[h], spare) + 1) for h in seq]
            for pick in itertools.product(*ranges):
                carried = sum(pick)
                if carried > spare:
                    continue
                # same accumulation order as the plan timestamps
                clock = 0.0
                prev = k
                for h, p in zip(seq, pick):
                    clock = clock + a.tt[prev][h] + a.t_p * p
                    prev = h
                for s in a.gathering:
                    if clock + a.tt[last][s] > a.t_max:
                        continue
                    code = tuple((1, h, p) for h, p in zip(seq, pick)) + ((0, s),)
                    out.append(
                        (code, tuple(zip(seq, pick)), s, own + carried, dist + a.dd[last][s])
                    )
    out.sort(key=lambda o: o[0])
    return out


def solve_brute_force(inst: Instance, limits: OracleLimits = OracleLimits()) -> Plan:
    """Canonical optimum by exhaustive enumeration.

    Maximises evacuees; ties go to the least total distance, then to the
    lexicographically smallest route encoding.  Distance ties are compared in
    floating point, so cross-solver plan equality is exact on integer-valued
    distance matrices.
    """
    a = inst.arrays
    if len(a.owners) > limits.max_vehicles or len(a.carless) > limits.max_carless:
        raise LimitExceeded(
            f"|R|={len(a.owners)}, |H|={len(a.carless)} exceeds "
            f"({limits.max_vehicles}, {limits.max_carless})"
        )
    H = list(a.carless)
    radix = [a.demand[h] + 1 for h in H]
    stride = np.ones(len(H), dtype=np.int64)
    for i in range(len(H) - 2, -1, -1):
        stride[i] = stride[i + 1] * radix[i + 1]
    grids = np.indices(radix).reshape(len(H), -1).T if H else np.zeros((1, 0), dtype=np.int64)
    states = np.ascontiguousarray(grids, dtype=np.int64)
    n_states = states.shape[0]
    hpos = {h: i for i, h in enumerate(H)}

    options = []
    layers = []
    next_e = np.zeros(n_states, dtype=np.int64)
    next_d = np.zeros(n_states, dtype=np.float64)
    for k in reversed(a.owners):
        opts = vehicle_routes(inst, k)
        P = np.zeros((len(opts), len(H)), dtype=np.int64)
        for o, (_, stops, _, _, _) in enumerate(opts):
            for h, p in stops:
                P[o, hpos[h]] = p
        pidx = P @ stride if H else np.zeros(len(opts), dtype=np.int64)
        evac = np.array([o[3] for o in opts], dtype=np.int64)
        dist = np.array([o[4] for o in opts], dtype=np.float64)
        next_e, next_d, choice = _kernels.dp_layer(states, P, pidx, evac, dist, next_e, next_d)
        options.append((opts, pidx))
        layers.append(choice)
    options.reverse()
    layers.reverse()

    state = n_states - 1  # full residual demand
    routes = []
    for k, (opts, pidx), choice in zip(a.owners, options, layers):
        o = int(choice[state])
        _, stops, dest, _, _ = opts[o]
        routes.append(make_route(inst, k, stops, dest))
        state -= int(pidx[o])
    return make_plan(inst, routes)
