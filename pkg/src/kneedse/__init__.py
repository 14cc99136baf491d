"""kneedse: trace-driven cache and register-file sizing.

Replays workload traces through a two-level cache hierarchy and a
rename-limited single-issue timing model, sweeps (L1, L2, RF) sizes with
geometry-derived access latencies, and picks the best (minimum cycles) and
optimum (smallest area within a penalty band) configurations.
"""

__version__ = "0.1.0"

from ._kernels import active_backend
from .cachesim import (AccessOutcome, CacheGeometry, ConfigError, Hierarchy,
                       HierarchyConfig, LevelStats, lru_oracle, new_hierarchy)
from .pipeline import (ConfigResult, PipelineConfig, PipelineConfigError, simulate,
                       stall_breakdown)
from .report import (CurveSeries, build_curve, emit_csv, emit_curves_json, emit_summary,
                     load_curves_json)
from .sweep import (FixedParams, SelectionReport, SweepSpec, SweepSpecError, explore,
                    find_optimum, joint_explore, load_spec, penalties, run_sweep,
                    two_phase_explore)
from .timing import (AreaProxy, TimingModel, TimingTableError, UncalibratedGeometryError,
                     access_time_ns, area_proxy, cycles_for, load_timing_table)
from .tracegen import (Trace, TraceError, TraceEvent, TraceMeta, gen_hash_lookup,
                       gen_pointer_chase, gen_streaming, load_trace, parse_trace,
                       region_filter, save_trace, trace_to_text)

__all__ = [
    "AccessOutcome", "AreaProxy", "CacheGeometry", "ConfigError", "ConfigResult",
    "CurveSeries", "FixedParams", "Hierarchy", "HierarchyConfig", "LevelStats",
    "PipelineConfig", "PipelineConfigError", "SelectionReport", "SweepSpec",
    "SweepSpecError", "TimingModel", "TimingTableError", "Trace", "TraceError",
    "TraceEvent", "TraceMeta", "UncalibratedGeometryError", "access_time_ns",
    "active_backend", "area_proxy", "build_curve", "cycles_for", "emit_csv",
    "emit_curves_json", "emit_summary", "explore", "find_optimum", "gen_hash_lookup",
    "gen_pointer_chase", "gen_streaming", "joint_explore", "load_curves_json",
    "load_spec", "load_timing_table", "load_trace", "lru_oracle", "new_hierarchy",
    "parse_trace", "penalties", "region_filter", "run_sweep", "save_trace",
    "simulate", "stall_breakdown", "trace_to_text", "two_phase_explore",
]
