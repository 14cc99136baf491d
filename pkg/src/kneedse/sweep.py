"""Design-space exploration: grid sweeps, penalties, best/optimum selection.

Two protocols. ``joint`` enumerates the full (L1 x L2 x RF) grid. ``two_phase``
follows the cheaper measurement protocol: sweep the cache grid at an ample
register file first, then sweep the register file at the winning cache sizes.
On tiny grids the joint sweep is the oracle the two-phase heuristic is tested
against.

Selection vocabulary: *best* is the minimum-cycle configuration (ties broken
by smaller area, then lexicographically smaller key, which also realizes
"first point where peak performance is reached" on saturated curves);
*optimum* is the smallest-area configuration whose penalty
(cycles - best)/best stays within epsilon (default 3%).
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from .cachesim import CacheGeometry, HierarchyConfig
from .pipeline import PipelineConfig, simulate
from .report import CurveSeries, build_curve
from .timing import TimingModel, access_time_ns, cycles_for, load_timing_table
from .tracegen import load_trace

DEFAULT_L1_SIZES = [4096, 8192, 16384, 32768, 65536, 131072, 262144]
DEFAULT_L2_SIZES = [32768, 65536, 131072, 262144, 524288, 1048576]
DEFAULT_RF_SIZES = [24, 32, 40, 48, 56, 64, 72, 80, 96, 128]
DEFAULT_EPSILON = 0.03


class SweepSpecError(ValueError):
    """A sweep specification invariant is violated."""


@dataclass(frozen=True)
class FixedParams:
    l1_line_bytes: int = 64
    l1_assoc: int = 4
    l2_line_bytes: int = 64
    l2_assoc: int = 8
    mem_latency_cycles: int = 50
    arch_regs: int = 16
    rob_size: int = 64
    alu_latency_cycles: int = 1
    phys_regs: int = 80          # used only when rf_sizes is empty
    reg_width_bits: int = 64


@dataclass(frozen=True)
class SweepSpec:
    trace: object
    timing: TimingModel
    l1_sizes: tuple = tuple(DEFAULT_L1_SIZES)
    l2_sizes: tuple = tuple(DEFAULT_L2_SIZES)
    rf_sizes: tuple = tuple(DEFAULT_RF_SIZES)
    l1i_sizes: tuple = ()        # split-L1 sweep when both given
    l1d_sizes: tuple = ()
    fixed: FixedParams = field(default_factory=FixedParams)
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        object.__setattr__(self, "l1_sizes", tuple(self.l1_sizes))
        object.__setattr__(self, "l2_sizes", tuple(self.l2_sizes))
        object.__setattr__(self, "rf_sizes", tuple(self.rf_sizes))
        object.__setattr__(self, "l1i_sizes", tuple(self.l1i_sizes))
        object.__setattr__(self, "l1d_sizes", tuple(self.l1d_sizes))
        if bool(self.l1i_sizes) != bool(self.l1d_sizes):
            raise SweepSpecError("split sweeps need both l1i_sizes and l1d_sizes")
        if not self.split_l1 and not self.l1_sizes:
            raise SweepSpecError("l1_sizes must be non-empty")
        if not self.l2_sizes:
            raise SweepSpecError("l2_sizes must be non-empty")
        for name, sizes in (("l1_sizes", self.l1_sizes), ("l2_sizes", self.l2_sizes),
                            ("l1i_sizes", self.l1i_sizes), ("l1d_sizes", self.l1d_sizes)):
            if list(sizes) != sorted(set(sizes)):
                raise SweepSpecError(f"{name} must be strictly increasing")
            for s in sizes:
                if s < 1 or s & (s - 1):
                    raise SweepSpecError(f"{name} entry {s} is not a power of two")
        if list(self.rf_sizes) != sorted(set(self.rf_sizes)):
            raise SweepSpecError("rf_sizes must be strictly increasing")
        if not 0 <= self.epsilon < 1:
            raise SweepSpecError("epsilon must be in [0, 1)")

    @property
    def split_l1(self):
        return bool(self.l1i_sizes)

    def l1_pairs(self):
        """(l1i, l1d) size pairs of the L1 dimension, row-major when split."""
        if self.split_l1:
            return [(i, d) for i in self.l1i_sizes for d in self.l1d_sizes]
        return [(s, s) for s in self.l1_sizes]

    def key_for(self, l1_pair, l2, rf):
        l1i, l1d = l1_pair
        l1 = l1i if l1i == l1d else (l1i, l1d)
        return (l1, l2, rf)

    def grid_keys(self, rf_sizes=None):
        """Valid grid keys in row-major (l1, l2, rf) order; l2 >= each L1."""
        rfs = self.rf_sizes if rf_sizes is None else tuple(rf_sizes)
        if not rfs:
            rfs = (self.fixed.phys_regs,)
        keys = []
        for pair in self.l1_pairs():
            for l2 in self.l2_sizes:
                if l2 < max(pair):
                    continue
                for rf in rfs:
                    keys.append(self.key_for(pair, l2, rf))
        if not keys:
            raise SweepSpecError("no valid grid points (every l2 smaller than l1)")
        return keys

    def geometries_for(self, key):
        l1, l2, _ = key
        l1i, l1d = (l1, l1) if isinstance(l1, int) else l1
        f = self.fixed
        return (CacheGeometry(l1i, f.l1_line_bytes, f.l1_assoc, "L1I"),
                CacheGeometry(l1d, f.l1_line_bytes, f.l1_assoc, "L1D"),
                CacheGeometry(l2, f.l2_line_bytes, f.l2_assoc, "L2"))

    def configs_for(self, key):
        """(HierarchyConfig, PipelineConfig) for one grid key.

        Raises UncalibratedGeometryError in table timing mode when a geometry
        has no calibration row.
        """
        g1i, g1d, g2 = self.geometries_for(key)
        l1_lat = cycles_for(self.timing, access_time_ns(self.timing, g1d))
        l2_lat = cycles_for(self.timing, access_time_ns(self.timing, g2))
        if self.timing.mode == "table":
            access_time_ns(self.timing, g1i)  # fail fast on uncalibrated L1I too
        f = self.fixed
        hier = HierarchyConfig(g1i, g1d, g2, l1_lat, l2_lat, f.mem_latency_cycles)
        pcfg = PipelineConfig(arch_regs=f.arch_regs, phys_regs=key[2],
                              rob_size=f.rob_size,
                              alu_latency_cycles=f.alu_latency_cycles)
        return hier, pcfg


@dataclass
class SelectionReport:
    protocol: str
    epsilon: float
    results: list                 # ConfigResult, grid/phase order, penalties filled
    best: tuple
    optimum: tuple
    curves: list                  # CurveSeries
    phase_selections: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def result_for(self, key):
        for r in self.results:
            if r.key == key:
                return r
        raise KeyError(key)


def _simulate_key(spec, key):
    hier, pcfg = spec.configs_for(key)
    result = simulate(spec.trace, pcfg, hier, spec.timing, spec.fixed.reg_width_bits)
    result.key = key
    return result


_POOL_SPEC = None


def _pool_init(spec):
    global _POOL_SPEC
    _POOL_SPEC = spec


def _pool_run(key):
    return _simulate_key(_POOL_SPEC, key)


def _run_keys(spec, keys, jobs):
    for key in keys:
        spec.configs_for(key)  # abort before simulating anything on bad/uncalibrated specs
    if jobs <= 1 or len(keys) <= 1:
        return [_simulate_key(spec, key) for key in keys]
    with ProcessPoolExecutor(max_workers=min(jobs, len(keys)),
                             initializer=_pool_init, initargs=(spec,)) as pool:
        return list(pool.map(_pool_run, keys))


def run_sweep(spec, rf_sizes=None, jobs=1):
    """Simulate every valid grid point; results in deterministic grid order.

    ``jobs`` > 1 fans grid points out to worker processes; the gathered order
    and every value are identical to a serial run.
    """
    return _run_keys(spec, spec.grid_keys(rf_sizes), jobs)


def sort_key(result):
    return (result.cycles, result.area.bits, result.key)


def penalties(results):
    """Fill each result's penalty relative to the best (min cycles) point.

    Tie-break for best: smaller area proxy, then lexicographically smaller
    key. Returns the best result's key.
    """
    if not results:
        raise ValueError("penalties() needs a non-empty result list")
    best = min(results, key=sort_key)
    for r in results:
        r.penalty = (r.cycles - best.cycles) / best.cycles
    return best.key


def find_optimum(results, epsilon):
    """Smallest-area key among results with penalty <= epsilon.

    Ties broken by fewer cycles, then lexicographic key. Penalties must be
    filled.
    """
    if not results:
        raise ValueError("find_optimum() needs a non-empty result list")
    band = [r for r in results if r.penalty <= epsilon]
    pick = min(band, key=lambda r: (r.area.bits, r.cycles, r.key))
    return pick.key


def _curve_dims(spec):
    if spec.split_l1:
        dims = ["l1i", "l1d", "l2"]
    else:
        dims = ["l1", "l2"]
    if spec.rf_sizes:
        dims.append("rf")
    return dims


def _dim_value(key, dim):
    l1, l2, rf = key
    if dim == "l1":
        return l1
    if dim == "l1i":
        return l1[0] if isinstance(l1, tuple) else l1
    if dim == "l1d":
        return l1[1] if isinstance(l1, tuple) else l1
    if dim == "l2":
        return l2
    return rf


def _slice_results(results, around_key, dim):
    """Results matching ``around_key`` on every dimension except ``dim``."""
    out = []
    for r in results:
        ok = True
        for other in ("l1i", "l1d", "l2", "rf"):
            if other == dim or (dim == "l1" and other in ("l1i", "l1d")):
                continue
            if _dim_value(r.key, other) != _dim_value(around_key, other):
                ok = False
                break
        if ok:
            out.append(r)
    return out


def explore(spec, protocol="two_phase", jobs=1):
    """Run the selected protocol end to end and assemble a SelectionReport."""
    if protocol == "joint":
        return joint_explore(spec, jobs=jobs)
    if protocol == "two_phase":
        return two_phase_explore(spec, jobs=jobs)
    raise ValueError(f"protocol must be 'joint' or 'two_phase', got {protocol!r}")


def _sized(dim, results):
    return [(_dim_value(r.key, dim), r) for r in results]


def joint_explore(spec, jobs=1):
    results = run_sweep(spec, jobs=jobs)
    best = penalties(results)
    optimum = find_optimum(results, spec.epsilon)
    curves = [build_curve(dim, _sized(dim, _slice_results(results, best, dim)),
                          spec.epsilon)
              for dim in _curve_dims(spec)]
    return SelectionReport(protocol="joint", epsilon=spec.epsilon, results=results,
                           best=best, optimum=optimum, curves=curves,
                           meta=_report_meta(spec))


def two_phase_explore(spec, jobs=1):
    """Cache sweep at ample RF, then RF sweep at the best cache sizes.

    The report carries both phase curves, the combined best/optimum, and the
    per-phase selections.
    """
    if not spec.rf_sizes:
        raise SweepSpecError("two_phase_explore requires non-empty rf_sizes")
    rf_max = spec.rf_sizes[-1]
    phase1 = run_sweep(spec, rf_sizes=[rf_max], jobs=jobs)
    p1_best = penalties(phase1)

    bl1, bl2, _ = p1_best
    bl1i, bl1d = (bl1, bl1) if isinstance(bl1, int) else bl1
    phase2_spec = replace(
        spec,
        l1_sizes=() if spec.split_l1 else (bl1,),
        l1i_sizes=(bl1i,) if spec.split_l1 else (),
        l1d_sizes=(bl1d,) if spec.split_l1 else (),
        l2_sizes=(bl2,),
    )
    p1_by_key = {r.key: r for r in phase1}
    p2_keys = phase2_spec.grid_keys()
    fresh_keys = [k for k in p2_keys if k not in p1_by_key]
    fresh = dict(zip(fresh_keys, _run_keys(phase2_spec, fresh_keys, jobs)))
    phase2 = [p1_by_key.get(k) or fresh[k] for k in p2_keys]

    combined = phase1 + [fresh[k] for k in fresh_keys]
    best = penalties(combined)
    optimum = find_optimum(combined, spec.epsilon)
    p1_optimum = find_optimum(phase1, spec.epsilon)
    p2_best = min(phase2, key=sort_key).key
    p2_optimum = find_optimum(phase2, spec.epsilon)

    curves = []
    for dim in _curve_dims(spec):
        if dim == "rf":
            pts = phase2
        else:
            pts = _slice_results(phase1, p1_best, dim)
        curves.append(build_curve(dim, _sized(dim, pts), spec.epsilon))
    return SelectionReport(
        protocol="two_phase", epsilon=spec.epsilon, results=combined,
        best=best, optimum=optimum, curves=curves,
        phase_selections={"phase1_best": p1_best, "phase1_optimum": p1_optimum,
                          "phase2_best": p2_best, "phase2_optimum": p2_optimum},
        meta=_report_meta(spec),
    )


def _report_meta(spec):
    from ._kernels import active_backend
    meta = {
        "trace": getattr(spec.trace.meta, "name", ""),
        "trace_events": len(spec.trace),
        "timing_mode": spec.timing.mode,
        "cycle_ns": spec.timing.cycle_ns,
        "backend": active_backend(),
        "epsilon": spec.epsilon,
    }
    return meta


# ---------------------------------------------------------------------------
# JSON config loading
# ---------------------------------------------------------------------------

def timing_from_config(cfg, base_dir="."):
    mode = cfg.get("mode", "analytic")
    if mode == "table":
        path = cfg.get("path")
        if not path:
            raise SweepSpecError("table timing config needs a 'path'")
        with open(os.path.join(base_dir, path)) as f:
            return load_timing_table(f, cycle_ns=cfg.get("cycle_ns", 1.0),
                                     tech_node=cfg.get("tech_node", 90))
    if mode != "analytic":
        raise SweepSpecError(f"unknown timing mode {mode!r}")
    kwargs = {k: cfg[k] for k in ("t0", "a", "b", "c", "cycle_ns", "tech_node")
              if k in cfg}
    return TimingModel(mode="analytic", **kwargs)


def spec_from_config(cfg, trace=None, base_dir="."):
    """Build a SweepSpec from a parsed JSON config dict.

    ``trace`` overrides the config's trace path (the CLI passes the parsed
    trace in).
    """
    if trace is None:
        path = cfg.get("trace")
        if not path:
            raise SweepSpecError("config has no 'trace' and none was supplied")
        trace = load_trace(os.path.join(base_dir, path))
    timing = timing_from_config(cfg.get("timing", {}), base_dir)
    try:
        fixed = FixedParams(**cfg.get("fixed", {}))
    except TypeError as exc:
        raise SweepSpecError(f"bad 'fixed' section: {exc}") from None
    return SweepSpec(
        trace=trace,
        timing=timing,
        l1_sizes=cfg.get("l1_sizes", DEFAULT_L1_SIZES),
        l2_sizes=cfg.get("l2_sizes", DEFAULT_L2_SIZES),
        rf_sizes=cfg.get("rf_sizes", DEFAULT_RF_SIZES),
        l1i_sizes=cfg.get("l1i_sizes", ()),
        l1d_sizes=cfg.get("l1d_sizes", ()),
        fixed=fixed,
        epsilon=cfg.get("epsilon", DEFAULT_EPSILON),
    )


def load_spec(path, trace=None):
    with open(path) as f:
        cfg = json.load(f)
    return spec_from_config(cfg, trace=trace, base_dir=os.path.dirname(path) or ".")
