"""Compiled vs pure-Python layout evaluation.

Scores every n_a-subset of a potential set on the standard surrogate with
each available backend, checks they agree, and prints throughput.

    python benchmarks/bench_kernels.py [--n-pt 16] [--n-a 4] [--repeat 3]
"""

import argparse
import math
import time

import numpy as np

from fixture_sdp import kernels
from fixture_sdp.instances import standard_instance
from fixture_sdp.layouts import LayoutEvaluator


def _subsets(n_pt, n_a, limit, seed=0):
    rng = np.random.default_rng(seed)
    return np.array([np.sort(rng.choice(n_pt, n_a, replace=False)) for _ in range(limit)],
                    dtype=np.int64)


def run(n_pt=16, n_a=4, n_subsets=5000, repeat=3):
    inst = standard_instance(n_pt=n_pt, n_a=n_a)
    base = LayoutEvaluator(inst.reduced, inst.potential)
    subsets = _subsets(n_pt, n_a, min(n_subsets, math.comb(n_pt, n_a) * 4))
    results = {}
    for name in kernels.available():
        backend = kernels.get_backend(name)
        best = math.inf
        for _ in range(repeat):
            t0 = time.perf_counter()
            out = backend.evaluate_subsets(base.G, base.c, base.Bt, base.ut, base.wt, subsets)
            best = min(best, time.perf_counter() - t0)
        results[name] = (best, out)
    ref = results["python"][1]
    print(f"standard surrogate, N_PT={n_pt}, n_a={n_a}, {len(subsets)} subsets")
    for name, (secs, out) in sorted(results.items()):
        err = max(np.max(np.abs(out[0] - ref[0]) / np.abs(ref[0])),
                  np.max(np.abs(out[1] - ref[1]) / np.abs(ref[1])))
        speed = results["python"][0] / secs
        print(f"  {name:7s} {secs * 1e3:9.2f} ms  {len(subsets) / secs:11.0f} subsets/s  "
              f"x{speed:6.1f}  max rel diff {err:.1e}")
    return results


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n-pt", type=int, default=16)
    p.add_argument("--n-a", type=int, default=4)
    p.add_argument("--subsets", type=int, default=5000)
    p.add_argument("--repeat", type=int, default=3)
    a = p.parse_args()
    run(a.n_pt, a.n_a, a.subsets, a.repeat)
