"""Geometry -> access time (ns) and area-proxy models, plus cycle quantization.

Two modes. The analytic mode is a monotone fit over CACTI-5-class 90 nm
access times (see docs/timing_calibration.md for the calibration table and
least-squares fit):

    t(S, A) = t0 + a*log2(S/4096) + b*(sqrt(S/4096) - 1) + c*log2(A)

floored at t0, with S = size_bytes and A = associativity. The table mode is
the back-annotation channel: exact-match lookup of externally measured
(geometry -> access time) rows, never extrapolated.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

# Frozen defaults from the 90 nm calibration fit (rms error 0.016 ns).
DEFAULT_T0 = 0.4861
DEFAULT_A = 0.03861
DEFAULT_B = 0.15628
DEFAULT_C = 0.03323
DEFAULT_TECH_NM = 90
DEFAULT_CYCLE_NS = 1.0

TAG_STATUS_BITS = 2  # valid + dirty
ADDRESS_BITS = 64


class UncalibratedGeometryError(KeyError):
    """Table-mode query for a geometry with no calibration row."""


class TimingTableError(ValueError):
    """Malformed calibration CSV. ``line`` is the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class TimingModel:
    mode: str = "analytic"              # "analytic" or "table"
    t0: float = DEFAULT_T0
    a: float = DEFAULT_A
    b: float = DEFAULT_B
    c: float = DEFAULT_C
    table: dict = field(default_factory=dict)
    tech_node: int = DEFAULT_TECH_NM
    cycle_ns: float = DEFAULT_CYCLE_NS

    def __post_init__(self):
        if self.mode not in ("analytic", "table"):
            raise ValueError(f"mode must be 'analytic' or 'table', got {self.mode!r}")
        if self.cycle_ns <= 0:
            raise ValueError("cycle_ns must be positive")
        if self.mode == "analytic" and (self.a < 0 or self.b < 0):
            raise ValueError("analytic coefficients a, b must be non-negative")


@dataclass(frozen=True)
class AreaProxy:
    """Total storage bits of a configuration; mm2 only when table-calibrated."""

    bits: int
    mm2: float | None = None

    def __lt__(self, other):
        return self.bits < other.bits


def access_time_ns(model, geom):
    """Access time for a cache geometry under ``model``.

    Table mode requires an exact key match and raises
    :class:`UncalibratedGeometryError` otherwise (no silent fallback).
    """
    if model.mode == "table":
        key = (geom.label, geom.size_bytes, geom.line_bytes, geom.assoc)
        try:
            return model.table[key][0]
        except KeyError:
            raise UncalibratedGeometryError(
                f"no calibration row for {key}; add it to the timing table"
            ) from None
    s = geom.size_bytes / 4096.0
    t = (model.t0 + model.a * math.log2(s) + model.b * (math.sqrt(s) - 1.0)
         + model.c * math.log2(geom.assoc))
    return max(t, model.t0)


def table_area_mm2(model, geom):
    """Calibrated area for a geometry, or None when absent/analytic."""
    if model.mode != "table":
        return None
    row = model.table.get((geom.label, geom.size_bytes, geom.line_bytes, geom.assoc))
    return row[1] if row else None


def cycles_for(model, ns):
    """Quantize an access time into processor cycles: ceil(ns/cycle), min 1."""
    if ns <= 0:
        raise ValueError(f"access time must be positive, got {ns}")
    return max(1, math.ceil(ns / model.cycle_ns))


_TABLE_HEADER = ["label", "size_bytes", "line_bytes", "assoc", "access_ns", "area_mm2"]


def load_timing_table(stream, cycle_ns=DEFAULT_CYCLE_NS, tech_node=DEFAULT_TECH_NM):
    """Build a table-mode TimingModel from the calibration CSV.

    Header ``label,size_bytes,line_bytes,assoc,access_ns,area_mm2``; one row
    per geometry, ``area_mm2`` may be empty. Duplicate keys and non-positive
    times are rejected with their line number.
    """
    if isinstance(stream, bytes):
        stream = io.StringIO(stream.decode("utf-8"))
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    table = {}
    header_seen = False
    for line_no, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if not header_seen:
            if [c.strip() for c in row] != _TABLE_HEADER:
                raise TimingTableError(
                    f"expected header {','.join(_TABLE_HEADER)}", line=line_no)
            header_seen = True
            continue
        if len(row) != len(_TABLE_HEADER):
            raise TimingTableError(f"expected {len(_TABLE_HEADER)} columns", line=line_no)
        label = row[0].strip()
        try:
            key = (label, int(row[1]), int(row[2]), int(row[3]))
            access_ns = float(row[4])
            area = float(row[5]) if row[5].strip() else None
        except ValueError as exc:
            raise TimingTableError(str(exc), line=line_no) from None
        if access_ns <= 0:
            raise TimingTableError(f"access_ns must be positive, got {access_ns}",
                                   line=line_no)
        if key in table:
            raise TimingTableError(f"duplicate key {key}", line=line_no)
        table[key] = (access_ns, area)
    return TimingModel(mode="table", table=table, cycle_ns=cycle_ns, tech_node=tech_node)


def _cache_bits(geom):
    tag_bits = ADDRESS_BITS - geom.line_shift - (geom.n_sets.bit_length() - 1)
    return geom.size_bytes * 8 + geom.n_lines * (tag_bits + TAG_STATUS_BITS)


def area_proxy(hier, phys_regs, reg_width_bits=64, model=None):
    """Storage-bit proxy: cache data + tag/status bits + the register file.

    Strictly monotone in every dimension. When a table-mode ``model`` holds
    mm2 for all three caches, their sum rides along as ``AreaProxy.mm2``.
    """
    bits = (_cache_bits(hier.l1i) + _cache_bits(hier.l1d) + _cache_bits(hier.l2)
            + phys_regs * reg_width_bits)
    mm2 = None
    if model is not None:
        areas = [table_area_mm2(model, g) for g in (hier.l1i, hier.l1d, hier.l2)]
        if all(a is not None for a in areas):
            mm2 = sum(areas)
    return AreaProxy(bits=bits, mm2=mm2)


def latencies_for(model, hier_l1d, hier_l2):
    """(l1, l2) latency cycles for a pair of geometries under ``model``."""
    return (cycles_for(model, access_time_ns(model, hier_l1d)),
            cycles_for(model, access_time_ns(model, hier_l2)))
