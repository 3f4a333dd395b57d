"""Compare the compiled kernels with the numpy/Python fallback.

Run with ``python benchmarks/bench_kernels.py``.  Each kernel is timed on
identical inputs under both backends and the outputs are checked for
bit-identity.
"""

import argparse
import math
import time

import numpy as np

from logitmeta import _kernels_py, chain, sim, zoo

try:
    from logitmeta import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_subset_flows(impl, counts, repeat):
    g = zoo.make_random_potential(len(counts), counts, seed=1)
    c = chain.build_chain(g, 2.0)
    p, ef, qi = chain._local_flows(c, np.arange(g.size), c.pi)
    args = (p, ef, qi.indptr.astype(np.int64), qi.indices.astype(np.int64), qi.data.astype(float))
    return best_of(lambda: impl.subset_flows(*args), repeat)


def bench_simulate_path(impl, steps, repeat):
    g = zoo.make_curie_weiss(10)
    util, rad, st = sim._arrays(g)
    u = sim.stream(0, 0).random((steps, 2))

    def run():
        tr = np.zeros((1, g.size), np.uint8)
        tr[0, 0] = 1
        fh = -np.ones(1, np.int64)
        occ = np.zeros((1, 1), np.int64)
        vis = np.zeros(g.size, np.int64)
        x = impl.simulate_path(util, rad, st, 0.3, g.size - 1, u, 0, tr, fh, occ, steps,
                               vis, np.zeros(0, np.int64))
        return x, vis
    return best_of(run, repeat)


def bench_step_batch(impl, count, repeat):
    g = zoo.make_random_potential(4, (3, 3, 3, 3), seed=2)
    util, rad, st = sim._arrays(g)
    u = sim.stream(0, 1).random((count, 2))

    def run():
        s = np.zeros(count, np.int64)
        impl.step_batch(util, rad, st, 1.5, s, u)
        return s
    return best_of(run, repeat)


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--counts", default="3,3,2", help="strategy counts of the subset_flows game")
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--batch", type=int, default=200_000)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled extension not built; only the fallback is available")
        return
    counts = tuple(int(v) for v in args.counts.split(","))
    size = math.prod(counts)
    cases = [
        (f"subset_flows ({size} states, {2**size} subsets)",
         lambda m: bench_subset_flows(m, counts, args.repeat)),
        (f"simulate_path ({args.steps} steps, CW n=10)",
         lambda m: bench_simulate_path(m, args.steps, args.repeat)),
        (f"step_batch ({args.batch} draws, 81 states)",
         lambda m: bench_step_batch(m, args.batch, args.repeat)),
    ]
    print(f"{'kernel':50s} {'python s':>10s} {'compiled s':>11s} {'speedup':>8s} identical")
    for name, fn in cases:
        tp, op = fn(_kernels_py)
        tc, oc = fn(_kernels)
        print(f"{name:50s} {tp:10.4f} {tc:11.4f} {tp / tc:8.1f} {same(op, oc)}")


if __name__ == "__main__":
    main()
