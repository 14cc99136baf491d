"""Deterministic single-issue timing model with register renaming and a ROB.

The model deliberately simplifies a full out-of-order pipeline down to the
effects the sweeps measure: rename stalls when the physical register file
runs dry, ROB-occupancy stalls, and cache latency exposed through blocking
memory and load-use dependences. Per event, in order:

1. I-fetch at the event's pc. Fetches that hit L1I pipeline at one per
   cycle; a missing fetch blocks the next fetch until it completes.
2. Rename: allocate one physical register per destination; wait for in-order
   commits to refill the free list (stall_rename) or to free a ROB entry
   (stall_rob).
3. Issue at the latest of: previous issue + 1 (single issue), fetch done,
   source-ready cycles, and for loads/stores the completion of the previous
   memory access (blocking single-port data path).
4. Complete at issue + alu latency (instr) or issue + data-access latency
   (load/store). Destinations become ready at completion.
5. Commit in order, one per cycle; committing frees the previous mapping of
   each destination. Total cycles = commit cycle of the last region event.

Destination architectural ids are not carried by traces (only a count);
the model assigns them round-robin over 0..arch_regs-1 in commit order, and
the trace generators use the same convention to build dependence chains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .cachesim import Hierarchy
from .tracegen import region_filter
from .timing import AreaProxy, area_proxy


class PipelineConfigError(ValueError):
    """A pipeline configuration invariant is violated."""


@dataclass(frozen=True)
class PipelineConfig:
    issue_width: int = 1
    arch_regs: int = 16
    phys_regs: int = 80
    rob_size: int = 64
    alu_latency_cycles: int = 1

    def __post_init__(self):
        if self.issue_width != 1:
            raise PipelineConfigError("only issue_width=1 is modeled")
        if self.arch_regs < 1:
            raise PipelineConfigError("arch_regs must be >= 1")
        if self.phys_regs < self.arch_regs + 1:
            raise PipelineConfigError(
                f"phys_regs must be >= arch_regs + 1 "
                f"({self.phys_regs} < {self.arch_regs + 1})")
        if self.rob_size < 1:
            raise PipelineConfigError("rob_size must be >= 1")
        if self.alu_latency_cycles < 1:
            raise PipelineConfigError("alu_latency_cycles must be >= 1")


@dataclass
class ConfigResult:
    """Measured outcome of one (trace, configuration) run."""

    cycles: int
    instructions: int
    cache_stats: dict                      # label -> LevelStats
    stall_rename: int
    stall_rob: int
    stall_mem: int
    area: AreaProxy
    penalty: float = 0.0                   # filled by the sweep module
    key: tuple = ()                        # (l1, l2, rf), filled by the sweep module

    @property
    def perf_per_area(self):
        if self.cycles == 0 or self.area.bits == 0:
            return 0.0
        return 1.0 / (self.cycles * self.area.bits)

    def as_dict(self):
        return {
            "key": list(self.key),
            "cycles": self.cycles,
            "instructions": self.instructions,
            "cache_stats": {k: v.as_dict() for k, v in self.cache_stats.items()},
            "stall_rename": self.stall_rename,
            "stall_rob": self.stall_rob,
            "stall_mem": self.stall_mem,
            "penalty": self.penalty,
            "area_bits": self.area.bits,
            "area_mm2": self.area.mm2,
            "perf_per_area": self.perf_per_area,
        }


def simulate(trace, pcfg, hier_cfg, model=None, reg_width_bits=64):
    """Replay the trace's measured region through the timing model.

    ``hier_cfg`` must already carry its back-annotated latencies (the sweep
    module derives them from ``model`` via cycles_for(access_time_ns)).
    ``model`` here only feeds the area proxy. An empty region yields a
    zero-cycle result.
    """
    region = region_filter(trace)
    area = area_proxy(hier_cfg, pcfg.phys_regs, reg_width_bits, model)

    n = len(region)
    if n == 0:
        hier = Hierarchy(hier_cfg)
        return ConfigResult(cycles=0, instructions=0, cache_stats=hier.stats,
                            stall_rename=0, stall_rob=0, stall_mem=0, area=area)

    max_dst = int(region.dsts.max())
    if max_dst > pcfg.phys_regs - pcfg.arch_regs:
        raise PipelineConfigError(
            f"an event writes {max_dst} destinations but only "
            f"{pcfg.phys_regs - pcfg.arch_regs} rename registers exist")
    if int(region.srcs.max()) >= pcfg.arch_regs:
        raise PipelineConfigError(
            f"trace uses source register id {int(region.srcs.max())} "
            f">= arch_regs {pcfg.arch_regs}")

    hier = Hierarchy(hier_cfg)
    ilat, dlat = hier.replay_trace(region)

    cycles, stall_rename, stall_rob, stall_mem = _kernels.pipeline_replay(
        region.kinds, region.dsts.astype(np.int64), region.srcs, ilat, dlat,
        pcfg.arch_regs, pcfg.phys_regs, pcfg.rob_size,
        pcfg.alu_latency_cycles, hier_cfg.l1_latency_cycles,
    )
    return ConfigResult(
        cycles=int(cycles), instructions=n, cache_stats=hier.stats,
        stall_rename=int(stall_rename), stall_rob=int(stall_rob),
        stall_mem=int(stall_mem), area=area,
    )


def stall_breakdown(result):
    """Ordered (cause, cycles, fraction) rows; fractions sum to 1 exactly.

    ``busy`` is the complement of the three stall counters. A zero-cycle
    result yields an empty breakdown.
    """
    if result.cycles == 0:
        return []
    total = result.cycles
    busy = total - result.stall_rename - result.stall_rob - result.stall_mem
    rows = [
        ("rename", result.stall_rename),
        ("rob", result.stall_rob),
        ("mem", result.stall_mem),
        ("busy", busy),
    ]
    return [(cause, cyc, cyc / total) for cause, cyc in rows]
