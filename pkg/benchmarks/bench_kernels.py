"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat N] [--size N]

Both paths are imported side by side, so the EVACSHARE_DISABLE_NUMBA flag is
not needed here.  The first numba call (compilation or cache load) is
excluded from the timings and reported separately.
"""

import argparse
import time

import numpy as np

from evacshare import _kernels as K


def _time(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _dp_inputs(rng, n_h, top, n_opt):
    radix = np.full(n_h, top + 1)
    strides = np.cumprod(np.concatenate(([1], radix[:-1])))
    # state id = sum of digit * stride, so subtracting pidx moves to the residual
    states = np.array(
        [[(i // strides[h]) % radix[h] for h in range(n_h)] for i in range(int(np.prod(radix)))],
        dtype=np.int64,
    )
    P = rng.integers(0, 2, size=(n_opt, n_h))
    pidx = P @ strides
    evac = P.sum(axis=1) + 3
    dist = rng.uniform(1, 10, size=n_opt)
    next_e = rng.integers(0, 20, size=len(states))
    next_d = rng.uniform(0, 30, size=len(states))
    return states, P, pidx, evac, dist, next_e, next_d


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--size", type=int, default=60, help="matrix side for the path kernels")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)

    w = rng.uniform(1, 20, size=(args.size, args.size))
    np.fill_diagonal(w, 0)
    path = np.arange(8)
    cands = np.arange(8, args.size)
    dp = _dp_inputs(rng, n_h=5, top=3, n_opt=200)

    cases = [
        ("shortest_paths", K.shortest_paths_numba, K.shortest_paths_numpy, (w,)),
        ("dp_layer", K.dp_layer_numba, K.dp_layer_numpy, dp),
        ("insertion_times", K.insertion_times_numba, K.insertion_times_numpy, (path, cands, w)),
    ]
    print(f"numba available: {K.HAVE_NUMBA}; default backend: {K.backend()}")
    print(f"{'kernel':<16} {'first numba':>12} {'numba':>10} {'numpy':>10} {'speedup':>8}")
    for name, fast, slow, inp in cases:
        t0 = time.perf_counter()
        a = fast(*inp)
        first = time.perf_counter() - t0
        b = slow(*inp)
        for x, y in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
            np.testing.assert_allclose(x, y, rtol=0, atol=1e-9)
        tn = _time(fast, inp, args.repeat)
        tp = _time(slow, inp, args.repeat)
        print(f"{name:<16} {first * 1e3:>10.2f}ms {tn * 1e6:>8.1f}us {tp * 1e6:>8.1f}us {tp / tn:>7.1f}x")


if __name__ == "__main__":
    main()
