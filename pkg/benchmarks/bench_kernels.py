#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Runs each kernel on representative workloads (frame-operator accumulation
over quadrature nodes, compensated inner products, confluent series) and
prints a timing table.  The numba path is warmed before timing so JIT
compilation is not billed to the kernel.

Select the fallback globally with LANDAUCS_DISABLE_NUMBA=1; this script
always times both paths directly.
"""

import argparse
import time

import numpy as np

from landaucs import _kernels as K


def _time(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_frame(nodes, dim, rng):
    v = rng.standard_normal((nodes, dim)) + 1j * rng.standard_normal((nodes, dim))
    w = rng.random(nodes) + 0.1
    out = [("frame_accumulate", f"{nodes}x{dim}")]
    if K._HAVE_NUMBA:
        K._frame_accumulate_numba(v[:2], w[:2])  # warm
        t_nb = _time(K._frame_accumulate_numba, v, w)
        out.append(("numba", t_nb))
    t_np = _time(K._frame_accumulate_numpy, v, w)
    out.append(("numpy", t_np))
    if K._HAVE_NUMBA:
        a = K._frame_accumulate_numba(v, w)
        b = K._frame_accumulate_numpy(v, w)
        out.append(("max diff", float(np.max(np.abs(a - b)))))
    return out

def bench_cdot(size, rng):
    a = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    b = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    out = [("cdot", f"{size}")]
    if K._HAVE_NUMBA:
        K._cdot_numba(a[:2], b[:2])
        out.append(("numba", _time(K._cdot_numba, a, b, repeat=20)))
    out.append(("numpy", _time(K._cdot_numpy, a, b, repeat=20)))
    return out


def bench_kummer(rng):
    gammas = rng.uniform(0.1, 5.0, 200)
    xs = rng.uniform(0.0, 50.0, 200)

    def run(fn):
        for g, x in zip(gammas, xs):
            fn(g, x, 1e-16, 10_000)

    out = [("kummer_series", "200 evals")]
    if K._HAVE_NUMBA:
        K._kummer_series_numba(1.0, 1.0, 1e-16, 100)
        out.append(("numba", _time(run, K._kummer_series_numba, repeat=10)))
    out.append(("numpy", _time(run, K._kummer_series_numpy, repeat=10)))
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--nodes", type=int, default=4096)
    parser.add_argument("--dim", type=int, default=128)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"active backend: {K.active_backend()} (numba available: {K._HAVE_NUMBA})")
    results = [
        bench_frame(args.nodes, args.dim, rng),
        bench_cdot(100_000, rng),
        bench_kummer(rng),
    ]
    for block in results:
        name, size = block[0]
        print(f"\n{name} [{size}]")
        for label, value in block[1:]:
            if isinstance(value, float) and label != "max diff":
                print(f"  {label:>8}: {value * 1e3:9.3f} ms")
            else:
                print(f"  {label:>8}: {value:.3e}")


if __name__ == "__main__":
    main()
