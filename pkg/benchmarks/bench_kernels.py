"""Time the numba kernels against the numpy fallback on identical inputs.

    python3 benchmarks/bench_kernels.py [--depth 14] [--reps 20000] [--repeat 3]

The first numba call per kernel compiles; that cost is reported separately
and excluded from the steady-state timings. Outputs are checked for equality
so the comparison is like for like.
"""
import argparse
import time

import numpy as np

from gwperc._kernels import _hash, get
from gwperc.collapsed import CHERRY, F1, V1, Monomial, _flatten
from gwperc.gwtree import sample_tree
from gwperc.offspring import one_or_three


def timed(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(depth, reps):
    dist = one_or_three()
    cdf = np.ascontiguousarray(dist.cdf)
    root = _hash.root_key(7)
    salts = _hash.replicate_salts(11, reps)
    ps = np.array([0.6, 0.75, 0.9])
    tree = sample_tree(dist, min(depth, 10), 7)
    deg, starts = tree.degree_arrays(tree.depth)
    items = [(V1, F1), (CHERRY, Monomial((0, 0)))]
    par, ordi, nch, fs, base, size = _flatten(items)
    mono = (root, depth, cdf, salts, ps[1:2], 1, 64, np.zeros(2, dtype=np.int64), base, size, par, ordi, nch, fs)
    return {
        "survival_stream": (root, depth, cdf, ps),
        "level_sizes": (root, depth, cdf),
        "mc_survival": (root, depth, cdf, salts, 0.75),
        "mc_branching_depth": (root, depth, cdf, salts, 0.75),
        "mc_monomial_values": mono,
        "subset_dp": (deg, starts, tree.depth, 0.5, 3, 2),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=1e-12, atol=1e-14)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--depth", type=int, default=14)
    ap.add_argument("--reps", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"{'kernel':<20} {'compile s':>10} {'numba s':>10} {'numpy s':>10} {'speedup':>8}  equal")
    for name, call_args in cases(args.depth, args.reps).items():
        fast, slow = get(name, "numba"), get(name, "numpy")
        t0 = time.perf_counter()
        fast(*call_args)
        compile_s = time.perf_counter() - t0
        t_fast, out_fast = timed(lambda: fast(*call_args), args.repeat)
        t_slow, out_slow = timed(lambda: slow(*call_args), args.repeat)
        print(f"{name:<20} {compile_s:>10.2f} {t_fast:>10.4f} {t_slow:>10.4f} {t_slow / t_fast:>8.1f}  "
              f"{same(out_fast, out_slow)}")


if __name__ == "__main__":
    main()
