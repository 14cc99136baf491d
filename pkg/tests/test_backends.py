"""numba and pure-Python kernel twins must agree bit for bit."""

import os
import subprocess
import sys

import numpy as np
import pytest

from kneedse import _kernels
from kneedse.cachesim import CacheGeometry, HierarchyConfig, new_hierarchy
from kneedse.pipeline import PipelineConfig, simulate
from kneedse.tracegen import gen_hash_lookup, gen_pointer_chase, region_filter

numba_selected = _kernels.active_backend() == "numba"


def hier_cfg():
    return HierarchyConfig(
        CacheGeometry(4096, 64, 4, "L1I"),
        CacheGeometry(4096, 64, 2, "L1D"),
        CacheGeometry(65536, 64, 8, "L2"),
        1, 2, 50,
    )


def run_hierarchy(kernel, trace):
    cfg = hier_cfg()
    h = new_hierarchy(cfg)
    region = region_filter(trace)
    n = len(region)
    ilat = np.zeros(n, np.int64)
    dlat = np.zeros(n, np.int64)
    counter = kernel(
        region.kinds, region.pcs.astype(np.int64), region.addrs.astype(np.int64),
        h._l1i.tags, h._l1i.stamp, h._l1i.dirty,
        h._l1d.tags, h._l1d.stamp, h._l1d.dirty,
        h._l2.tags, h._l2.stamp, h._l2.dirty,
        h._l1i.geom.line_shift, h._l1d.geom.line_shift, h._l2.geom.line_shift,
        cfg.l1_latency_cycles, cfg.l2_latency_cycles, cfg.mem_latency_cycles,
        h._stats, 0, ilat, dlat,
    )
    return ilat, dlat, h._stats.copy(), counter


def run_pipeline(kernel, trace, ilat, dlat):
    region = region_filter(trace)
    return kernel(region.kinds, region.dsts.astype(np.int64), region.srcs,
                  ilat, dlat, 16, 40, 64, 1, 1)


@pytest.fixture(scope="module")
def traces():
    return [gen_pointer_chase(8192, 64, 1500, seed=3),
            gen_hash_lookup(1 << 17, 512, 800, seed=4)]


@pytest.mark.skipif(not numba_selected, reason="numba backend not active")
class TestBackendEquality:
    def test_hierarchy_kernels_agree(self, traces):
        for trace in traces:
            fast = run_hierarchy(_kernels.hierarchy_replay, trace)
            slow = run_hierarchy(_kernels._hierarchy_replay, trace)
            assert np.array_equal(fast[0], slow[0])
            assert np.array_equal(fast[1], slow[1])
            assert np.array_equal(fast[2], slow[2])
            assert fast[3] == slow[3]

    def test_pipeline_kernels_agree(self, traces):
        for trace in traces:
            ilat, dlat, _, _ = run_hierarchy(_kernels._hierarchy_replay, trace)
            fast = run_pipeline(_kernels.pipeline_replay, trace, ilat, dlat)
            slow = run_pipeline(_kernels._pipeline_replay, trace, ilat, dlat)
            assert tuple(fast) == tuple(slow)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, KNEE_DSE_BACKEND="numpy")
    out = subprocess.run(
        [sys.executable, "-c",
         "import kneedse; print(kneedse.active_backend())"],
        env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_numpy_backend_simulation_matches(tmp_path):
    """Full simulate() under the numpy backend reproduces the numba result."""
    trace = gen_hash_lookup(1 << 16, 64, 300, seed=9)
    r = simulate(trace, PipelineConfig(), hier_cfg())
    script = (
        "import json\n"
        "from kneedse.pipeline import PipelineConfig, simulate\n"
        "from kneedse.tracegen import gen_hash_lookup\n"
        "from kneedse.cachesim import CacheGeometry, HierarchyConfig\n"
        "cfg = HierarchyConfig(CacheGeometry(4096,64,4,'L1I'),"
        "CacheGeometry(4096,64,2,'L1D'),CacheGeometry(65536,64,8,'L2'),1,2,50)\n"
        "t = gen_hash_lookup(1 << 16, 64, 300, seed=9)\n"
        "r = simulate(t, PipelineConfig(), cfg)\n"
        "print(json.dumps([r.cycles, r.stall_rename, r.stall_rob, r.stall_mem]))\n"
    )
    env = dict(os.environ, KNEE_DSE_BACKEND="numpy")
    out = subprocess.run([sys.executable, "-c", script], env=env,
                         capture_output=True, text=True, check=True)
    import json
    assert json.loads(out.stdout) == [r.cycles, r.stall_rename, r.stall_rob, r.stall_mem]
