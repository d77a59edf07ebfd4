import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evacshare.experiment import GenConfig, generate_instance
from evacshare.heuristic import (
    InfeasibleStart,
    LocalSearchConfig,
    greedy_construct,
    local_search,
    solve_heuristic,
)
from evacshare.oracle import solve_brute_force
from evacshare.plan import Plan, Route, Stop, check_feasibility, empty_plan
from helpers import random_small, t1


def test_t1_values():
    assert greedy_construct(t1(t_max=8)).evacuated_total == 6
    assert greedy_construct(t1(t_max=6)).evacuated_total == 5
    assert greedy_construct(t1(t_max=2)).evacuated_total == 0


@settings(max_examples=120, deadline=None)
@given(seed=st.integers(0, 1_000_000), asym=st.booleans())
def test_greedy_and_local_search_are_feasible_and_bounded(seed, asym):
    inst = random_small(seed, asymmetric=asym)
    best = solve_brute_force(inst).evacuated_total
    g = greedy_construct(inst)
    ls = local_search(inst, g)
    assert check_feasibility(inst, g).ok and check_feasibility(inst, ls).ok
    assert g.evacuated_total <= ls.evacuated_total <= best


def test_local_search_from_empty_plan_improves():
    inst = random_small(4)
    start = empty_plan(inst)
    out = local_search(inst, start)
    assert check_feasibility(inst, out).ok
    assert out.evacuated_total >= start.evacuated_total


def test_infeasible_start_is_rejected():
    bad = Plan((Route("r1", True, (Stop("h1", 3, 5.0),), "s1", 7.0),), 6)
    with pytest.raises(InfeasibleStart):
        local_search(t1(t_max=6), bad)


def test_zero_iterations_returns_the_start():
    inst = random_small(9)
    start = greedy_construct(inst)
    assert local_search(inst, start, LocalSearchConfig(max_iterations=0)) is start


def test_config_validation():
    with pytest.raises(ValueError):
        LocalSearchConfig(max_iterations=-1)
    with pytest.raises(ValueError):
        LocalSearchConfig(neighborhoods=("teleport",))


def test_on_accept_sees_only_feasible_non_worse_plans():
    inst = generate_instance(GenConfig(r_ratio=0.3, t_max=11))
    start = greedy_construct(inst)
    seen = []
    local_search(inst, start, on_accept=seen.append)
    last = start.evacuated_total
    for plan in seen:
        assert check_feasibility(inst, plan).ok
        assert plan.evacuated_total >= start.evacuated_total
        last = plan.evacuated_total
    assert last >= start.evacuated_total


@pytest.mark.parametrize("seed", [0, 1, 17])
def test_same_seed_same_plan(seed):
    inst = generate_instance(GenConfig(r_ratio=0.4, t_max=13))
    cfg = LocalSearchConfig(seed=seed)
    assert solve_heuristic(inst, cfg).to_json() == solve_heuristic(inst, cfg).to_json()


def test_default_instance_runs_fast():
    inst = generate_instance(GenConfig())
    solve_heuristic(inst)  # warm any kernel compilation
    t0 = time.perf_counter()
    plan = solve_heuristic(inst)
    assert time.perf_counter() - t0 < 1.0
    assert check_feasibility(inst, plan).ok
