"""Method dispatch shared by the CLI and the sweep harness."""

from .exact import ExactConfig, solve_exact
from .heuristic import LocalSearchConfig, greedy_construct, local_search
from .oracle import solve_brute_force

METHODS = ("brute", "exact", "greedy", "local-search", "heuristic")


def run_method(
    inst,
    method,
    time_limit=60.0,
    node_limit=10_000_000,
    workers=1,
    seed=0,
    max_iter=1000,
    canonical=True,
):
    """Solve ``inst`` with ``method``; returns ``(plan, status)``.

    ``heuristic`` is an alias of ``local-search`` (greedy start plus
    local search).
    """
    if method == "brute":
        return solve_brute_force(inst), "optimal"
    if method == "exact":
        cfg = ExactConfig(time_limit=time_limit, node_limit=node_limit, workers=workers, canonical=canonical)
        res = solve_exact(inst, cfg)
        return res.plan, res.status
    if method == "greedy":
        return greedy_construct(inst), "heuristic"
    if method in ("local-search", "heuristic"):
        cfg = LocalSearchConfig(max_iterations=max_iter, seed=seed)
        return local_search(inst, greedy_construct(inst), cfg), "heuristic"
    raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
