"""Two-level set-associative cache hierarchy with LRU replacement.

Split L1I/L1D over a unified L2, serial lookup (an L1 miss pays the L1 probe
before the L2 probe, an L2 miss pays both before memory), write-back +
write-allocate with writebacks counted but never timed, non-inclusive
fill-on-miss allocation, blocking single-port semantics.

Two equivalent implementations are exposed on purpose:

* :meth:`Hierarchy.access` - readable single-access reference path returning
  a full :class:`AccessOutcome` (eviction list included).
* :meth:`Hierarchy.replay` - the batch kernel (numba or numpy backend) used
  by the pipeline and sweeps.

:func:`lru_oracle` is a third, independent model (per-set stack distances)
used only to cross-check miss counts in tests.

A :class:`Hierarchy` is single-owner mutable state; simulate distinct
instances on distinct threads, never share one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .tracegen import KIND_LOAD, KIND_STORE

VALID_LABELS = ("L1I", "L1D", "L2")

_ADDR_LIMIT = 1 << 63  # kernels use int64 line arithmetic


class ConfigError(ValueError):
    """A cache geometry or hierarchy invariant is violated."""


def _is_pow2(x):
    return x >= 1 and x & (x - 1) == 0


@dataclass(frozen=True)
class CacheGeometry:
    size_bytes: int
    line_bytes: int
    assoc: int
    label: str

    def __post_init__(self):
        if self.label not in VALID_LABELS:
            raise ConfigError(f"label must be one of {VALID_LABELS}, got {self.label!r}")
        if not _is_pow2(self.size_bytes):
            raise ConfigError(f"{self.label}: size_bytes {self.size_bytes} is not a power of two")
        if not _is_pow2(self.line_bytes) or self.line_bytes < 8:
            raise ConfigError(f"{self.label}: line_bytes must be a power of two >= 8")
        if self.assoc < 1:
            raise ConfigError(f"{self.label}: assoc must be >= 1")
        if self.assoc > self.size_bytes // self.line_bytes:
            raise ConfigError(f"{self.label}: assoc {self.assoc} exceeds line count")
        if (not _is_pow2(self.n_sets)
                or self.n_sets * self.line_bytes * self.assoc != self.size_bytes):
            raise ConfigError(
                f"{self.label}: size must factor as n_sets * line_bytes * assoc "
                f"with a power-of-two set count")

    @property
    def n_lines(self):
        return self.size_bytes // self.line_bytes

    @property
    def n_sets(self):
        return self.size_bytes // (self.line_bytes * self.assoc)

    @property
    def line_shift(self):
        return self.line_bytes.bit_length() - 1


@dataclass(frozen=True)
class HierarchyConfig:
    """Geometry plus back-annotated latencies. Write policy is fixed:
    write-back, write-allocate."""

    l1i: CacheGeometry
    l1d: CacheGeometry
    l2: CacheGeometry
    l1_latency_cycles: int = 1
    l2_latency_cycles: int = 2
    mem_latency_cycles: int = 50

    def __post_init__(self):
        if self.l1i.label != "L1I" or self.l1d.label != "L1D" or self.l2.label != "L2":
            raise ConfigError("hierarchy geometries must be labeled L1I/L1D/L2")
        if self.l2.size_bytes < max(self.l1i.size_bytes, self.l1d.size_bytes):
            raise ConfigError("L2 must be at least as large as each L1")
        if not (1 <= self.l1_latency_cycles <= self.l2_latency_cycles <= self.mem_latency_cycles):
            raise ConfigError("latencies must satisfy 1 <= l1 <= l2 <= mem")


@dataclass
class LevelStats:
    accesses: int = 0
    hits: int = 0
    misses: int = 0
    writebacks: int = 0

    def as_dict(self):
        return {"accesses": self.accesses, "hits": self.hits,
                "misses": self.misses, "writebacks": self.writebacks}


@dataclass(frozen=True)
class AccessOutcome:
    level_served: str                   # "L1", "L2", or "MEM"
    latency_cycles: int
    evictions: tuple = ()               # (level label, victim line base addr, dirty)


class _Level:
    def __init__(self, geom):
        self.geom = geom
        self.tags = np.full((geom.n_sets, geom.assoc), -1, np.int64)
        self.stamp = np.zeros((geom.n_sets, geom.assoc), np.int64)
        self.dirty = np.zeros((geom.n_sets, geom.assoc), bool)


class Hierarchy:
    """Mutable simulation state for one HierarchyConfig (cold at creation)."""

    def __init__(self, cfg):
        if not isinstance(cfg, HierarchyConfig):
            raise ConfigError("cfg must be a HierarchyConfig")
        self.cfg = cfg
        self._l1i = _Level(cfg.l1i)
        self._l1d = _Level(cfg.l1d)
        self._l2 = _Level(cfg.l2)
        self._counter = 0
        self._stats = np.zeros((3, 4), np.int64)

    @property
    def stats(self):
        """Per-level counters as {label: LevelStats}."""
        out = {}
        for row, label in ((_kernels.L1I, "L1I"), (_kernels.L1D, "L1D"), (_kernels.L2, "L2")):
            a, h, m, wb = (int(x) for x in self._stats[row])
            out[label] = LevelStats(a, h, m, wb)
        return out

    # -- single-access reference path ------------------------------------

    def _touch(self, lvl, si, way):
        self._counter += 1
        lvl.stamp[si, way] = self._counter

    def _lookup(self, lvl, line):
        si = line & (lvl.geom.n_sets - 1)
        ways = lvl.tags[si]
        for w in range(lvl.geom.assoc):
            if ways[w] == line:
                return si, w
        return si, -1

    def _victim(self, lvl, si):
        for w in range(lvl.geom.assoc):
            if lvl.tags[si, w] == -1:
                return w
        return int(np.argmin(lvl.stamp[si]))

    def _fill(self, lvl, si, line, dirty, row, evictions):
        w = self._victim(lvl, si)
        old = lvl.tags[si, w]
        if old != -1:
            was_dirty = bool(lvl.dirty[si, w])
            if was_dirty:
                self._stats[row, _kernels.WRITEBACKS] += 1
                if row != _kernels.L2:
                    self._writeback_to_l2(old << lvl.geom.line_shift)
            evictions.append((lvl.geom.label, int(old << lvl.geom.line_shift), was_dirty))
        lvl.tags[si, w] = line
        lvl.dirty[si, w] = dirty
        self._touch(lvl, si, w)

    def _writeback_to_l2(self, victim_addr):
        # dirty L1 victim: mark the L2 copy dirty when present; no LRU touch,
        # no access counted (else the data goes straight to memory)
        line = victim_addr >> self._l2.geom.line_shift
        si, w = self._lookup(self._l2, line)
        if w >= 0:
            self._l2.dirty[si, w] = True

    def access(self, addr, kind):
        """Run one access; kind is 'ifetch', 'load', or 'store'."""
        if kind not in ("ifetch", "load", "store"):
            raise ValueError(f"kind must be ifetch/load/store, got {kind!r}")
        if not (0 <= addr < _ADDR_LIMIT):
            raise ValueError(f"address 0x{addr:x} outside supported range [0, 2^63)")
        lvl = self._l1i if kind == "ifetch" else self._l1d
        row = _kernels.L1I if kind == "ifetch" else _kernels.L1D
        is_store = kind == "store"
        cfg = self.cfg
        evictions = []

        line = addr >> lvl.geom.line_shift
        si, w = self._lookup(lvl, line)
        self._stats[row, _kernels.ACCESSES] += 1
        if w >= 0:
            self._stats[row, _kernels.HITS] += 1
            self._touch(lvl, si, w)
            if is_store:
                lvl.dirty[si, w] = True
            return AccessOutcome("L1", cfg.l1_latency_cycles, ())

        self._stats[row, _kernels.MISSES] += 1
        uline = addr >> self._l2.geom.line_shift
        usi, uw = self._lookup(self._l2, uline)
        self._stats[_kernels.L2, _kernels.ACCESSES] += 1
        if uw >= 0:
            self._stats[_kernels.L2, _kernels.HITS] += 1
            self._touch(self._l2, usi, uw)
            level, lat = "L2", cfg.l1_latency_cycles + cfg.l2_latency_cycles
        else:
            self._stats[_kernels.L2, _kernels.MISSES] += 1
            self._fill(self._l2, usi, uline, False, _kernels.L2, evictions)
            level = "MEM"
            lat = cfg.l1_latency_cycles + cfg.l2_latency_cycles + cfg.mem_latency_cycles

        self._fill(lvl, si, line, is_store, row, evictions)
        return AccessOutcome(level, lat, tuple(evictions))

    # -- batch path -------------------------------------------------------

    def replay(self, kinds, pcs, addrs):
        """Replay an event stream through the backend kernel.

        ``kinds`` uses the tracegen codes (region markers must already be
        filtered out). Returns (ilat, dlat) int64 arrays: I-fetch latency per
        event and data latency per load/store (0 elsewhere). Stats accumulate.
        """
        kinds = np.ascontiguousarray(kinds, np.uint8)
        pcs = np.asarray(pcs)
        addrs = np.asarray(addrs)
        if pcs.size and int(pcs.max(initial=0)) >= _ADDR_LIMIT:
            raise ValueError("pc outside supported range [0, 2^63)")
        if addrs.size and int(addrs.max(initial=0)) >= _ADDR_LIMIT:
            raise ValueError("address outside supported range [0, 2^63)")
        pcs = np.ascontiguousarray(pcs, np.int64)
        addrs = np.ascontiguousarray(addrs, np.int64)

        n = len(kinds)
        ilat = np.zeros(n, np.int64)
        dlat = np.zeros(n, np.int64)
        if n == 0:
            return ilat, dlat
        cfg = self.cfg
        self._counter = _kernels.hierarchy_replay(
            kinds, pcs, addrs,
            self._l1i.tags, self._l1i.stamp, self._l1i.dirty,
            self._l1d.tags, self._l1d.stamp, self._l1d.dirty,
            self._l2.tags, self._l2.stamp, self._l2.dirty,
            self._l1i.geom.line_shift, self._l1d.geom.line_shift, self._l2.geom.line_shift,
            cfg.l1_latency_cycles, cfg.l2_latency_cycles, cfg.mem_latency_cycles,
            self._stats, self._counter, ilat, dlat,
        )
        return ilat, dlat

    def replay_trace(self, trace):
        return self.replay(trace.kinds, trace.pcs, trace.addrs)


def new_hierarchy(cfg):
    """Cold hierarchy state for ``cfg`` (all sets empty, stats zeroed)."""
    return Hierarchy(cfg)


def lru_oracle(trace_addresses, geometry):
    """Reference single-level LRU miss count via per-set stack distances.

    An access misses iff it is a first touch or its reuse distance within its
    set (distinct lines touched since the last access to its line) is >= the
    associativity. Read-only probe semantics; independent of the simulator's
    tag/victim machinery.
    """
    from collections import OrderedDict
    from itertools import islice

    assoc = geometry.assoc
    n_sets = geometry.n_sets
    shift = geometry.line_shift
    stacks = {}
    misses = 0
    for addr in trace_addresses:
        line = int(addr) >> shift
        si = line & (n_sets - 1)
        od = stacks.get(si)
        if od is None:
            od = stacks[si] = OrderedDict()
        if line in od:
            hit = any(l == line for l in islice(reversed(od), assoc))
            if not hit:
                misses += 1
            od.move_to_end(line)
        else:
            misses += 1
            od[line] = None
    return misses
