"""Numeric inner loops, compiled with numba when available.

Every kernel exists twice: a ``@njit`` loop version and a vectorised numpy
version with identical results.  The numba path is used unless numba is
missing or ``EVACSHARE_DISABLE_NUMBA`` is set to a truthy value.
"""

import os

import numpy as np

_DISABLED = os.environ.get("EVACSHARE_DISABLE_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
    "on",
)

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USING_NUMBA = HAVE_NUMBA and not _DISABLED


# ---------------------------------------------------------------------------
# all-pairs shortest paths


def _shortest_paths_py(w):
    d = w.copy()
    n = d.shape[0]
    for m in range(n):
        for i in range(n):
            dim = d[i, m]
            for j in range(n):
                alt = dim + d[m, j]
                if alt < d[i, j]:
                    d[i, j] = alt
    return d


def shortest_paths_numpy(w):
    d = np.array(w, dtype=np.float64, copy=True)
    for m in range(d.shape[0]):
        np.minimum(d, d[:, m, None] + d[None, m, :], out=d)
    return d


# ---------------------------------------------------------------------------
# one layer of the residual-demand dynamic program (oracle)
#
# states:   (n_states, n_h) residual demand vector of every state
# state_id: (n_states,) mixed-radix index of each state (== row number)
# P:        (n_opt, n_h) pickups of each route option, options sorted canonically
# pidx:     (n_opt,) mixed-radix offset of each option's pickup vector
# evac/dist: per-option evacuees and distance
# next_e/next_d: best values of the remaining vehicles, indexed by state id
#
# Returns best evacuees, best distance and chosen option per state.  Ties on
# evacuees go to the shorter distance, then to the lowest option index.


def _dp_layer_py(states, P, pidx, evac, dist, next_e, next_d):
    n_states, n_h = states.shape
    n_opt = P.shape[0]
    best_e = np.full(n_states, -1, dtype=np.int64)
    best_d = np.zeros(n_states, dtype=np.float64)
    choice = np.full(n_states, -1, dtype=np.int64)
    for s in range(n_states):
        for o in range(n_opt):
            ok = True
            for h in range(n_h):
                if P[o, h] > states[s, h]:
                    ok = False
                    break
            if not ok:
                continue
            nxt = s - pidx[o]
            e = evac[o] + next_e[nxt]
            d = dist[o] + next_d[nxt]
            if e > best_e[s] or (e == best_e[s] and d < best_d[s]):
                best_e[s] = e
                best_d[s] = d
                choice[s] = o
    return best_e, best_d, choice


def dp_layer_numpy(states, P, pidx, evac, dist, next_e, next_d):
    n_states = states.shape[0]
    if P.shape[1]:
        feasible = (P[None, :, :] <= states[:, None, :]).all(axis=2)
    else:
        feasible = np.ones((n_states, P.shape[0]), dtype=bool)
    nxt = np.arange(n_states)[:, None] - pidx[None, :]
    nxt = np.where(feasible, nxt, 0)
    e = np.where(feasible, evac[None, :] + next_e[nxt], -1)
    best_e = e.max(axis=1)
    tied = e == best_e[:, None]
    d = np.where(tied, dist[None, :] + next_d[nxt], np.inf)
    best_d = d.min(axis=1)
    choice = np.argmax(tied & (d == best_d[:, None]), axis=1)
    return best_e.astype(np.int64), best_d, choice.astype(np.int64)


# ---------------------------------------------------------------------------
# travel time of a path with one candidate node inserted (greedy insertion)
#
# path:  node indices [start, stop_1, ..., stop_n]
# cands: candidate node indices
# out[c, q]: travel time of path with cands[c] inserted before position q+1,
#            q = 0..n  (q = n appends at the end)


def _insertion_times_py(path, cands, tt):
    n = path.shape[0]
    base = 0.0
    for a in range(n - 1):
        base += tt[path[a], path[a + 1]]
    out = np.empty((cands.shape[0], n), dtype=np.float64)
    for c in range(cands.shape[0]):
        h = cands[c]
        for q in range(n):
            prev = path[q]
            if q + 1 < n:
                nxt = path[q + 1]
                out[c, q] = base - tt[prev, nxt] + tt[prev, h] + tt[h, nxt]
            else:
                out[c, q] = base + tt[prev, h]
    return out


def insertion_times_numpy(path, cands, tt):
    path = np.asarray(path, dtype=np.int64)
    cands = np.asarray(cands, dtype=np.int64)
    legs = tt[path[:-1], path[1:]]
    base = legs.sum() if legs.size else 0.0
    # removed leg for interior insertions, zero for the append slot
    removed = np.append(legs, 0.0)
    into = tt[path[:, None], cands[None, :]].T
    out_of = np.zeros((cands.shape[0], path.shape[0]))
    if path.shape[0] > 1:
        out_of[:, :-1] = tt[cands[:, None], path[None, 1:]]
    return base - removed[None, :] + into + out_of


if HAVE_NUMBA:
    shortest_paths_numba = njit(cache=True)(_shortest_paths_py)
    dp_layer_numba = njit(cache=True)(_dp_layer_py)
    insertion_times_numba = njit(cache=True)(_insertion_times_py)
else:  # pragma: no cover
    shortest_paths_numba = _shortest_paths_py
    dp_layer_numba = _dp_layer_py
    insertion_times_numba = _insertion_times_py


if USING_NUMBA:
    _sp_impl, _dp_impl, _ins_impl = shortest_paths_numba, dp_layer_numba, insertion_times_numba
else:
    _sp_impl, _dp_impl, _ins_impl = shortest_paths_numpy, dp_layer_numpy, insertion_times_numpy


def shortest_paths(w):
    """All-pairs shortest path lengths of a dense non-negative weight matrix."""
    return _sp_impl(np.ascontiguousarray(w, dtype=np.float64))


def dp_layer(states, P, pidx, evac, dist, next_e, next_d):
    return _dp_impl(
        np.ascontiguousarray(states, dtype=np.int64),
        np.ascontiguousarray(P, dtype=np.int64),
        np.ascontiguousarray(pidx, dtype=np.int64),
        np.ascontiguousarray(evac, dtype=np.int64),
        np.ascontiguousarray(dist, dtype=np.float64),
        np.ascontiguousarray(next_e, dtype=np.int64),
        np.ascontiguousarray(next_d, dtype=np.float64),
    )


def insertion_times(path, cands, tt):
    return _ins_impl(
        np.ascontiguousarray(path, dtype=np.int64),
        np.ascontiguousarray(cands, dtype=np.int64),
        np.ascontiguousarray(tt, dtype=np.float64),
    )


def backend():
    return "numba" if USING_NUMBA else "numpy"
