import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evacshare.exact import LIMIT_REACHED, OPTIMAL, ExactConfig, solve_exact
from evacshare.experiment import GenConfig, generate_instance
from evacshare.instance import Instance, Location
from evacshare.oracle import solve_brute_force
from evacshare.plan import check_feasibility
from helpers import random_small, t1


@pytest.mark.parametrize("t_max, expected", [(8, 6), (6, 5), (2, 0)])
def test_t1_ladder(t_max, expected):
    res = solve_exact(t1(t_max=t_max))
    assert res.status == OPTIMAL
    assert res.objective == expected == res.best_bound
    assert res.plan == solve_brute_force(t1(t_max=t_max))


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 1_000_000), asym=st.booleans())
def test_matches_oracle_plan(seed, asym):
    inst = random_small(seed, asymmetric=asym)
    res = solve_exact(inst)
    assert res.status == OPTIMAL and res.best_bound == res.objective
    assert res.plan == solve_brute_force(inst)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 1_000_000))
def test_workers_do_not_change_the_plan(seed):
    inst = random_small(seed)
    one = solve_exact(inst, ExactConfig(workers=1)).plan
    assert solve_exact(inst, ExactConfig(workers=3)).plan == one
    assert solve_exact(inst, ExactConfig(workers=4, canonical=False)).objective == one.evacuated_total


def test_any_optimum_mode_keeps_the_objective():
    for seed in range(40):
        inst = random_small(seed)
        res = solve_exact(inst, ExactConfig(canonical=False))
        assert res.objective == solve_brute_force(inst).evacuated_total
        assert check_feasibility(inst, res.plan).ok


def test_node_limit_reports_bound_and_feasible_incumbent():
    inst = generate_instance(GenConfig(r_ratio=0.5, t_max=9))
    res = solve_exact(inst, ExactConfig(node_limit=3))
    assert res.status == LIMIT_REACHED
    assert res.best_bound >= res.objective
    assert check_feasibility(inst, res.plan).ok
    full = solve_exact(inst, ExactConfig(canonical=False))
    assert full.status == OPTIMAL
    assert res.objective <= full.objective <= res.best_bound


def test_status_record_fields():
    rec = solve_exact(t1()).status_record()
    assert set(rec) == {"status", "objective", "best_bound", "nodes", "seconds"}
    assert rec["status"] == "optimal" and rec["objective"] == 6 and rec["nodes"] >= 1


def test_no_carless_households():
    locs = (
        Location("r1", "vehicle_owner", 2, 5),
        Location("r2", "vehicle_owner", 3, 5),
        Location("s1", "gathering", 0),
    )
    inst = Instance("owners-only", locs, [[0, 9, 4], [9, 0, 7], [4, 7, 0]], t_p=1, t_max=5)
    res = solve_exact(inst)
    assert res.objective == 2
    assert [r.used for r in res.plan.routes] == [True, False]


def test_zero_boarding_time():
    inst = random_small(7).replace(t_p=0)
    assert solve_exact(inst).plan == solve_brute_force(inst)


@pytest.mark.slow
def test_default_sweep_cells_reach_optimality():
    for ratio in (0.3, 0.5, 0.7):
        for t_max in (5, 9, 13):
            inst = generate_instance(GenConfig(r_ratio=ratio, t_max=t_max))
            res = solve_exact(inst, ExactConfig(canonical=False, time_limit=60))
            assert res.status == OPTIMAL
            assert check_feasibility(inst, res.plan).ok
