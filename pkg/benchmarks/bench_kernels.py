#!/usr/bin/env python3
"""Time the numba kernels against their pure-Python twins.

Runs the cache-hierarchy replay and the pipeline replay over the demo hash
workload with both backends and prints per-event cost and speedup. The numba
side includes a warmup call so JIT compilation is not timed.

Usage: python3 benchmarks/bench_kernels.py [--events N] [--repeat K]
"""

import argparse
import time

import numpy as np

from kneedse import _kernels
from kneedse.cachesim import CacheGeometry, HierarchyConfig, new_hierarchy
from kneedse.tracegen import gen_hash_lookup, region_filter


def hier_cfg():
    return HierarchyConfig(
        CacheGeometry(32768, 64, 4, "L1I"),
        CacheGeometry(32768, 64, 4, "L1D"),
        CacheGeometry(262144, 64, 8, "L2"),
        1, 2, 50,
    )


def bench_hierarchy(kernel, region, repeat):
    cfg = hier_cfg()
    best = float("inf")
    for _ in range(repeat):
        h = new_hierarchy(cfg)
        n = len(region)
        ilat = np.zeros(n, np.int64)
        dlat = np.zeros(n, np.int64)
        t0 = time.perf_counter()
        kernel(region.kinds, region.pcs.astype(np.int64), region.addrs.astype(np.int64),
               h._l1i.tags, h._l1i.stamp, h._l1i.dirty,
               h._l1d.tags, h._l1d.stamp, h._l1d.dirty,
               h._l2.tags, h._l2.stamp, h._l2.dirty,
               h._l1i.geom.line_shift, h._l1d.geom.line_shift, h._l2.geom.line_shift,
               cfg.l1_latency_cycles, cfg.l2_latency_cycles, cfg.mem_latency_cycles,
               h._stats, 0, ilat, dlat)
        best = min(best, time.perf_counter() - t0)
    return best, (ilat, dlat)


def bench_pipeline(kernel, region, ilat, dlat, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        kernel(region.kinds, region.dsts.astype(np.int64), region.srcs,
               ilat, dlat, 16, 80, 64, 1, 1)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--events", type=int, default=50_000,
                    help="hash lookups in the benchmark trace (default 50k)")
    ap.add_argument("--repeat", type=int, default=3, help="reps, best-of (default 3)")
    args = ap.parse_args()

    if _kernels.active_backend() != "numba":
        print("note: KNEE_DSE_BACKEND forced numpy; only the Python twin will run\n")

    trace = gen_hash_lookup(2 * 1024 * 1024, 16384, args.events, seed=42)
    region = region_filter(trace)
    n = len(region)
    print(f"workload: hash demo, {n} events, best of {args.repeat}\n")

    rows = []
    jit_lat = None
    if _kernels.active_backend() == "numba":
        bench_hierarchy(_kernels.hierarchy_replay, region, 1)  # JIT warmup
        t_jit, jit_lat = bench_hierarchy(_kernels.hierarchy_replay, region, args.repeat)
        rows.append(("hierarchy", "numba", t_jit))
    t_py, py_lat = bench_hierarchy(_kernels._hierarchy_replay, region, args.repeat)
    rows.append(("hierarchy", "numpy", t_py))
    if jit_lat is not None:
        assert np.array_equal(jit_lat[0], py_lat[0]) and np.array_equal(jit_lat[1], py_lat[1])

    ilat, dlat = py_lat
    if _kernels.active_backend() == "numba":
        bench_pipeline(_kernels.pipeline_replay, region, ilat, dlat, 1)  # JIT warmup
        rows.append(("pipeline", "numba",
                     bench_pipeline(_kernels.pipeline_replay, region, ilat, dlat, args.repeat)))
    rows.append(("pipeline", "numpy",
                 bench_pipeline(_kernels._pipeline_replay, region, ilat, dlat, args.repeat)))

    print(f"{'kernel':<12}{'backend':<8}{'time':>10}{'ns/event':>12}")
    times = {}
    for kernel, backend, t in rows:
        times[(kernel, backend)] = t
        print(f"{kernel:<12}{backend:<8}{t:>9.4f}s{1e9 * t / n:>11.1f}")
    for kernel in ("hierarchy", "pipeline"):
        if (kernel, "numba") in times:
            print(f"{kernel}: numba speedup "
                  f"{times[(kernel, 'numpy')] / times[(kernel, 'numba')]:.0f}x")


if __name__ == "__main__":
    main()
