"""Time the compiled kernels against their plain-Python source and the numpy route.

    python benchmarks/bench_kernels.py [--n 8] [--u 4] [--reps 2000]
"""
import argparse
import time

import numpy as np

from rnr import _kernels
from rnr.graph_core import WeightedHypothesis
from rnr.simbench import random_graph
from rnr.solver import SolverConfig, _Problem
from rnr.undersampling import undersample, undersample_matrices


def per_call(fn, reps):
    fn()  # warm-up (compilation, caches)
    start = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - start) / reps


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=8)
    ap.add_argument("--u", type=int, default=4)
    ap.add_argument("--density", type=float, default=0.25)
    ap.add_argument("--reps", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    g = random_graph(args.n, args.density, args.seed)
    rows = _kernels.rows_from_matrix(g.adj)
    dird = np.zeros(args.n, dtype=np.int64)
    bid = np.zeros(args.n, dtype=np.int64)
    print(f"backend: {_kernels.KERNEL_BACKEND}; n={args.n} u={args.u} edges={g.n_edges}")

    kern = _kernels.undersample_rows
    timings = {
        "undersample kernel": per_call(lambda: kern(rows, args.u, dird, bid), args.reps),
        "undersample kernel (py_func)": per_call(lambda: kern.py_func(rows, args.u, dird, bid), args.reps // 10),
        "undersample numpy matrices": per_call(lambda: undersample_matrices(g.adj, args.u), args.reps),
        "undersample public API": per_call(lambda: undersample(g, args.u), args.reps),
    }
    for name, secs in timings.items():
        print(f"{name:32s} {secs * 1e6:10.2f} us/call")

    # one exact search at the true rate: optimise, then count the class
    hyp = WeightedHypothesis.uniform(undersample(g, args.u))
    prob = _Problem(hyp, SolverConfig(max_u=args.u))
    start = time.perf_counter()
    best, count, _, _, nodes = prob.run(args.u, np.array([0]), 2**62, True, 0)
    secs = time.perf_counter() - start
    print(f"search u={args.u}: {count} models at cost 0, {nodes} nodes, "
          f"{secs:.2f}s ({secs / max(nodes, 1) * 1e6:.1f} us/node)")


if __name__ == "__main__":
    main()
