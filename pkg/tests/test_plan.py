from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evacshare.instance import Instance, Location
from evacshare.oracle import solve_brute_force
from evacshare.plan import (
    DegenerateInstance,
    NoUsedVehicles,
    Plan,
    Route,
    Stop,
    UnknownId,
    average_travel_distance,
    check_feasibility,
    empty_plan,
    evacuation_percentage,
    make_plan,
    make_route,
)
from helpers import MUTATIONS, isolated_mutation_cases, random_small, t1


def _t1_route(pickup=3, depart=5.0, arrival=7.0):
    return Route("r1", True, (Stop("h1", pickup, depart),), "s1", arrival)


def test_t1_full_route_is_feasible():
    plan = Plan((_t1_route(),), 6)
    report = check_feasibility(t1(t_max=8), plan)
    assert report.ok and report.violations == ()


def test_t1_overload_reports_capacity_and_demand():
    # stored times recomputed for a pickup of 5: 0 + 2 + 5 = 7, arrival 9
    plan = Plan((_t1_route(pickup=5, depart=7.0, arrival=9.0),), 8)
    report = check_feasibility(t1(t_max=20), plan)
    assert report.codes == {"CapacityExceeded", "DemandExceeded"}
    cap = next(v for v in report.violations if v.code == "CapacityExceeded")
    dem = next(v for v in report.violations if v.code == "DemandExceeded")
    assert (cap.vehicle, cap.location) == ("r1", "h1") and "8 > capacity 7" in cap.detail
    assert dem.location == "h1" and dem.detail == "5 > 3"


def test_t1_deadline():
    report = check_feasibility(t1(t_max=6), Plan((_t1_route(),), 6))
    assert [(v.code, v.vehicle) for v in report.violations] == [("DeadlineViolated", "r1")]
    assert report.violations[0].detail == "7.0 > 6.0"


def test_make_route_timestamps_match_hand_values():
    r = make_route(t1(), 0, [(1, 3)], 2)
    assert r.stops[0].depart_time == 5.0 and r.arrival_time == 7.0


def test_unknown_id():
    plan = Plan((Route("r9", False),), 0)
    with pytest.raises(UnknownId):
        check_feasibility(t1(), plan)


@pytest.mark.parametrize(
    "route, code",
    [
        (Route("h1", False), "NotAVehicle"),
        (Route("r1", False, (Stop("h1", 1, 3.0),)), "UnusedRouteNotEmpty"),
        (Route("r1", True, (), None, None), "MissingDestination"),
        (Route("r1", True, (), "h1", 2.0), "DestinationNotGathering"),
        (Route("r1", True, (Stop("s1", 0, 3.0),), "s1", 3.0), "StopNotCarless"),
        (Route("r1", True, (Stop("h1", 1, 3.0), Stop("h1", 1, 4.0)), "s1", 6.0), "RevisitedLocation"),
        (Route("r1", True, (Stop("h1", -1, 1.0),), "s1", 3.0), "NegativePickup"),
    ],
)
def test_structural_violations(route, code):
    plan = make_plan(t1(t_max=50), [route]) if route.vehicle == "r1" else Plan((route,), 0)
    assert code in check_feasibility(t1(t_max=50), plan).codes


def test_missing_and_duplicate_routes():
    assert "MissingRoute" in check_feasibility(t1(), Plan((), 0)).codes
    twice = Plan((Route("r1", False), Route("r1", False)), 0)
    assert "DuplicateRoute" in check_feasibility(t1(), twice).codes


def test_total_mismatch():
    assert check_feasibility(t1(), Plan((_t1_route(),), 5)).codes == {"EvacuatedTotalMismatch"}


def test_zero_pickup_is_a_note_not_a_violation():
    plan = make_plan(t1(), [make_route(t1(), 0, [(1, 0)], 2)])
    report = check_feasibility(t1(), plan)
    assert report.ok
    assert [n.code for n in report.notes] == ["ZeroPickup"]


@pytest.mark.parametrize("case", isolated_mutation_cases(), ids=lambda c: c[3])
def test_isolated_mutations_report_exactly_their_code(case):
    inst, clean, mutated, code = case
    assert check_feasibility(inst, clean).ok
    assert check_feasibility(inst, mutated).codes == {code}


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_mutation_completeness_on_oracle_plans(seed):
    inst = random_small(seed)
    plan = solve_brute_force(inst)
    assert check_feasibility(inst, plan).ok
    for code, mutate in MUTATIONS.items():
        bad = mutate(inst, plan)
        if bad is None:
            continue
        codes = check_feasibility(inst, bad).codes
        assert code in codes
        if code in ("TimestampMismatch", "DeadlineViolated"):
            assert codes == {code}
        else:
            # more persons aboard can also break the other load bound or the clock
            assert codes <= {"CapacityExceeded", "DemandExceeded", "DeadlineViolated"}


def test_plan_json_round_trip():
    plan = solve_brute_force(random_small(11))
    assert Plan.from_json(plan.to_json()) == plan
    assert Plan.from_json(plan.to_json(indent=2)) == plan


# ---------------------------------------------------------------------------
# indicators


def test_ep_examples():
    plan = Plan((_t1_route(),), 6)
    assert evacuation_percentage(t1(), plan) == 1.0
    assert evacuation_percentage(t1(), empty_plan(t1())) == 0.0


def test_ep_degenerate():
    inst = Instance(
        "nobody",
        (Location("r1", "vehicle_owner", 0, 4), Location("s1", "gathering", 0)),
        [[0, 1], [1, 0]],
        t_p=1,
        t_max=5,
    )
    with pytest.raises(DegenerateInstance):
        evacuation_percentage(inst, empty_plan(inst))


def test_atd_single_route():
    inst = t1().replace(travel_distance=[[0, 1, 4], [1, 0, 1], [4, 1, 0]])
    plan = Plan((_t1_route(),), 6)
    assert average_travel_distance(inst, plan) == 2.0


def test_atd_without_used_vehicles():
    with pytest.raises(NoUsedVehicles):
        average_travel_distance(t1(), empty_plan(t1()))


def test_atd_ignores_unused_vehicles():
    inst = t1()
    plan = Plan((_t1_route(),), 6)
    # same map plus an idle owner
    locs = inst.locations + (Location("r2", "vehicle_owner", 2, 5),)
    tt = [list(r) + [4] for r in inst.travel_time] + [[4, 4, 4, 0]]
    bigger = Instance("T1+", locs, tt, t_p=1, t_max=8)
    padded = replace(plan, routes=plan.routes + (Route("r2", False),))
    assert check_feasibility(bigger, padded).ok
    assert average_travel_distance(bigger, padded) == average_travel_distance(inst, plan)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_ep_is_a_fraction_and_one_iff_everyone_leaves(seed):
    inst = random_small(seed)
    plan = solve_brute_force(inst)
    ep = evacuation_percentage(inst, plan)
    assert 0.0 <= ep <= 1.0
    assert (ep == 1.0) == (plan.evacuated_total == inst.total_demand)
