"""Instance builders shared by the test modules."""

import numpy as np

from evacshare.instance import CARLESS, GATHERING, VEHICLE_OWNER, Instance, Location


def t1(t_max=8, capacity=7):
    """One owner (3 people, 7 seats), one carless household, one gathering place."""
    locs = (
        Location("r1", VEHICLE_OWNER, 3, capacity),
        Location("h1", CARLESS, 3),
        Location("s1", GATHERING, 0),
    )
    tt = [[0, 2, 3], [2, 0, 2], [3, 2, 0]]
    return Instance("T1", locs, tt, t_p=1, t_max=t_max)


def T1_DOC(t_max=8):
    return {
        "name": "T1",
        "t_p": 1,
        "t_max": t_max,
        "locations": [
            {"id": "r1", "kind": "vehicle_owner", "demand": 3, "capacity": 7},
            {"id": "h1", "kind": "carless", "demand": 3},
            {"id": "s1", "kind": "gathering", "demand": 0},
        ],
        "travel_time": [[0, 2, 3], [2, 0, 2], [3, 2, 0]],
    }


def metric_closure(m):
    m = np.array(m, dtype=float)
    for k in range(len(m)):
        m = np.minimum(m, m[:, k, None] + m[None, k, :])
    return m


def random_small(seed, max_r=3, max_h=4, max_s=2, asymmetric=False):
    """Tiny instance with integer-valued metric matrices.

    The deadline is drawn around the typical owner -> carless -> gathering
    trip so that about half of the draws are deadline-constrained.
    """
    rng = np.random.default_rng(seed)
    nr = int(rng.integers(1, max_r + 1))
    nh = int(rng.integers(0, max_h + 1))
    ns = int(rng.integers(1, max_s + 1))
    n = nr + nh + ns
    pts = rng.integers(0, 10, size=(n, 2))
    base = np.ceil(np.hypot(*(pts[:, None, :] - pts[None, :, :]).transpose(2, 0, 1)))
    if asymmetric:
        base = base + rng.integers(0, 3, size=(n, n))
    np.fill_diagonal(base, 0)
    tt = metric_closure(base)
    dist = metric_closure(np.ceil(tt * 0.5) + rng.integers(0, 2, size=(n, n)) * (1 - np.eye(n)))
    locs = []
    for i in range(nr):
        locs.append(Location(f"r{i + 1}", VEHICLE_OWNER, int(rng.integers(1, 4)), int(rng.choice([5, 7]))))
    for i in range(nh):
        locs.append(Location(f"h{i + 1}", CARLESS, int(rng.integers(1, 4))))
    for i in range(ns):
        locs.append(Location(f"s{i + 1}", GATHERING, 0))
    R = range(nr)
    H = range(nr, nr + nh)
    S = range(nr + nh, n)
    if nh:
        trips = [tt[r, h] + 2 + tt[h, S].min() for r in R for h in H]
    else:
        trips = [tt[r, S].min() for r in R]
    t_max = float(np.round(rng.uniform(0.4, 1.6) * np.median(trips)))
    return Instance(f"rand{seed}", tuple(locs), tt.tolist(), t_p=1, t_max=t_max, travel_distance=dist.tolist())


# ---------------------------------------------------------------------------
# plan mutations: each returns a mutated Plan, or None when the plan offers
# no place to apply it


def _stops_of(inst, route):
    idx = inst.index
    return [(idx[s.location], s.pickup) for s in route.stops]


def _rebuilt(inst, plan, pos, stops, dest):
    """Replace route ``pos`` with recomputed timestamps and re-derive the total."""
    from evacshare.plan import make_plan, make_route

    routes = list(plan.routes)
    routes[pos] = make_route(inst, inst.index[routes[pos].vehicle], stops, dest)
    return make_plan(inst, routes)


def mutate_capacity(inst, plan):
    """Raise one pickup until the vehicle carries one person over capacity."""
    for pos, r in enumerate(plan.routes):
        if r.used and r.stops:
            k = inst.index[r.vehicle]
            load = inst.locations[k].demand + sum(s.pickup for s in r.stops)
            stops = _stops_of(inst, r)
            h, p = stops[-1]
            stops[-1] = (h, p + inst.locations[k].capacity - load + 1)
            return _rebuilt(inst, plan, pos, stops, inst.index[r.destination])
    return None


def mutate_demand(inst, plan):
    """Raise one pickup one person beyond what is left at that location."""
    picked = {}
    for r in plan.routes:
        for s in r.stops:
            picked[s.location] = picked.get(s.location, 0) + s.pickup
    for pos, r in enumerate(plan.routes):
        if r.used and r.stops:
            stops = _stops_of(inst, r)
            h, p = stops[0]
            left = inst.locations[h].demand - picked[inst.locations[h].id]
            stops[0] = (h, p + left + 1)
            return _rebuilt(inst, plan, pos, stops, inst.index[r.destination])
    return None


def mutate_deadline(inst, plan):
    """Send one route to the farthest gathering place when that misses t_max."""
    for pos, r in enumerate(plan.routes):
        if not r.used:
            continue
        stops = _stops_of(inst, r)
        last = stops[-1][0] if stops else inst.index[r.vehicle]
        clock = r.stops[-1].depart_time if r.stops else 0.0
        far = max(inst.gathering, key=lambda s: inst.travel_time[last][s])
        if clock + inst.travel_time[last][far] > inst.t_max + 1e-6:
            return _rebuilt(inst, plan, pos, stops, far)
    return None


def mutate_timestamp(inst, plan):
    """Shift one stored time by a minute."""
    from dataclasses import replace

    for pos, r in enumerate(plan.routes):
        if r.used:
            routes = list(plan.routes)
            if r.stops:
                stops = list(r.stops)
                stops[0] = replace(stops[0], depart_time=stops[0].depart_time + 1.0)
                routes[pos] = replace(r, stops=tuple(stops))
            else:
                routes[pos] = replace(r, arrival_time=r.arrival_time + 1.0)
            return replace(plan, routes=tuple(routes))
    return None


MUTATIONS = {
    "CapacityExceeded": mutate_capacity,
    "DemandExceeded": mutate_demand,
    "DeadlineViolated": mutate_deadline,
    "TimestampMismatch": mutate_timestamp,
}


def isolated_mutation_cases():
    """One (instance, feasible plan, mutated plan, code) case per mutation
    class, built on T1 variants where the mutation breaks nothing else."""
    from evacshare.plan import make_plan, make_route

    def plan(inst, p, dest=2):
        return make_plan(inst, [make_route(inst, 0, [(1, p)], dest)])

    cases = []
    # capacity 7, household h1 of 10: loading 5 puts 8 aboard, demand still fine
    big_h = t1(t_max=100).replace(
        locations=(t1().locations[0], Location("h1", CARLESS, 10), t1().locations[2])
    )
    cases.append((big_h, plan(big_h, 3), mutate_capacity(big_h, plan(big_h, 3)), "CapacityExceeded"))
    # 20 seats: taking 4 of 3 breaks only the demand
    roomy = t1(t_max=100, capacity=20)
    cases.append((roomy, plan(roomy, 3), mutate_demand(roomy, plan(roomy, 3)), "DemandExceeded"))
    # a second, distant gathering place
    two_s = Instance(
        "T1-far",
        t1().locations + (Location("s2", GATHERING, 0),),
        [[0, 2, 3, 9], [2, 0, 2, 9], [3, 2, 0, 9], [9, 9, 9, 0]],
        t_p=1,
        t_max=8,
    )
    cases.append((two_s, plan(two_s, 3), mutate_deadline(two_s, plan(two_s, 3)), "DeadlineViolated"))
    inst = t1()
    cases.append((inst, plan(inst, 3), mutate_timestamp(inst, plan(inst, 3)), "TimestampMismatch"))
    return cases
