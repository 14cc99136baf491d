"""Trace model, text format parsing, region filtering, and synthetic workload generators.

A trace is the commit-order event stream of one workload run. Events are kept
in parallel numpy arrays (see :class:`Trace`) so the simulator kernels can
replay them without per-event Python objects. Region markers (``B``/``E``)
bracket the measured unit of work; everything outside them is warmup/teardown
and is dropped by :func:`region_filter` before simulation.

The three generators stand in for the classic embedded locality archetypes:
``gen_pointer_chase`` (graph traversal, data-cache bound, no spatial
locality), ``gen_streaming`` (payload sweep, no temporal locality) and
``gen_hash_lookup`` (skewed flow-table lookups). All generators are pure
functions of their arguments: same arguments, byte-identical trace.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

# Event kind codes (values are frozen: kernels and the file format rely on them).
KIND_INSTR = 0
KIND_LOAD = 1
KIND_STORE = 2
KIND_REGION_BEGIN = 3
KIND_REGION_END = 4

KIND_NAMES = {
    KIND_INSTR: "instr",
    KIND_LOAD: "load",
    KIND_STORE: "store",
    KIND_REGION_BEGIN: "region_begin",
    KIND_REGION_END: "region_end",
}

MAX_DST_REGS = 2
MAX_SRC_REGS = 3
MAX_ACCESS_SIZE = 64

# Default architectural register id space for generated traces (x86 integer
# registers plus a few extras). Overridable per generator call.
DEFAULT_ARCH_REGS = 16

# Instruction events emitted per memory event by the generators.
DEFAULT_INSTR_RATIO = 2

_CODE_BASE = 0x401000
_DATA_BASE = 0x10000000


class TraceError(ValueError):
    """Malformed trace input. ``line`` is the 1-based offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class TraceEvent:
    """One committed instruction or region marker.

    ``addr`` and ``size`` are meaningful only for loads/stores. ``dst_regs``
    is a destination *count* (0-2); ``src_regs`` are architectural source ids.
    """

    kind: str
    pc: int = 0
    addr: int = 0
    size: int = 0
    dst_regs: int = 0
    src_regs: tuple = ()

    @property
    def is_mem(self):
        return self.kind in ("load", "store")


@dataclass
class TraceMeta:
    name: str = ""
    seed: int = 0
    params: dict = field(default_factory=dict)


class Trace:
    """Ordered event sequence held as parallel numpy arrays.

    ``srcs`` is an ``(n, 3)`` int16 array padded with -1. Traces are immutable
    by convention after construction and safe to share across threads.
    """

    def __init__(self, kinds, pcs, addrs, sizes, dsts, srcs, meta=None):
        self.kinds = np.ascontiguousarray(kinds, dtype=np.uint8)
        self.pcs = np.ascontiguousarray(pcs, dtype=np.uint64)
        self.addrs = np.ascontiguousarray(addrs, dtype=np.uint64)
        self.sizes = np.ascontiguousarray(sizes, dtype=np.uint16)
        self.dsts = np.ascontiguousarray(dsts, dtype=np.uint8)
        self.srcs = np.ascontiguousarray(srcs, dtype=np.int16).reshape(-1, MAX_SRC_REGS)
        self.meta = meta if meta is not None else TraceMeta()
        n = len(self.kinds)
        for arr in (self.pcs, self.addrs, self.sizes, self.dsts):
            if len(arr) != n:
                raise ValueError("trace arrays have inconsistent lengths")
        if len(self.srcs) != n:
            raise ValueError("trace arrays have inconsistent lengths")

    def __len__(self):
        return len(self.kinds)

    def __getitem__(self, i):
        k = int(self.kinds[i])
        srcs = tuple(int(s) for s in self.srcs[i] if s >= 0)
        return TraceEvent(
            kind=KIND_NAMES[k],
            pc=int(self.pcs[i]),
            addr=int(self.addrs[i]),
            size=int(self.sizes[i]),
            dst_regs=int(self.dsts[i]),
            src_regs=srcs,
        )

    def events(self):
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            np.array_equal(self.kinds, other.kinds)
            and np.array_equal(self.pcs, other.pcs)
            and np.array_equal(self.addrs, other.addrs)
            and np.array_equal(self.sizes, other.sizes)
            and np.array_equal(self.dsts, other.dsts)
            and np.array_equal(self.srcs, other.srcs)
        )

    @property
    def n_mem_events(self):
        return int(np.count_nonzero((self.kinds == KIND_LOAD) | (self.kinds == KIND_STORE)))

    @staticmethod
    def from_events(events, meta=None):
        n = len(events)
        kinds = np.zeros(n, np.uint8)
        pcs = np.zeros(n, np.uint64)
        addrs = np.zeros(n, np.uint64)
        sizes = np.zeros(n, np.uint16)
        dsts = np.zeros(n, np.uint8)
        srcs = np.full((n, MAX_SRC_REGS), -1, np.int16)
        name_to_code = {v: k for k, v in KIND_NAMES.items()}
        for i, ev in enumerate(events):
            kinds[i] = name_to_code[ev.kind]
            pcs[i] = ev.pc
            addrs[i] = ev.addr
            sizes[i] = ev.size
            dsts[i] = ev.dst_regs
            for j, s in enumerate(ev.src_regs):
                srcs[i, j] = s
        tr = Trace(kinds, pcs, addrs, sizes, dsts, srcs, meta)
        _validate(tr)
        return tr


def _validate(trace):
    """Enforce the structural trace invariants (marker balance, field presence)."""
    kinds = trace.kinds
    is_mem = (kinds == KIND_LOAD) | (kinds == KIND_STORE)
    is_marker = (kinds == KIND_REGION_BEGIN) | (kinds == KIND_REGION_END)

    if np.any(trace.dsts > MAX_DST_REGS):
        raise TraceError(f"dst_regs exceeds {MAX_DST_REGS}")
    if np.any(trace.dsts[kinds == KIND_STORE] != 0):
        raise TraceError("stores must not write destination registers")
    if np.any(is_marker & (trace.dsts > 0)):
        raise TraceError("region markers carry no registers")
    if np.any(is_marker & np.any(trace.srcs >= 0, axis=1)):
        raise TraceError("region markers carry no registers")

    sz = trace.sizes[is_mem].astype(np.int64)
    if len(sz) and (np.any(sz < 1) or np.any(sz > MAX_ACCESS_SIZE) or np.any(sz & (sz - 1))):
        raise TraceError(f"load/store size must be a power of two in 1..{MAX_ACCESS_SIZE}")
    if np.any(trace.sizes[~is_mem] != 0):
        raise TraceError("only loads/stores carry an access size")
    if np.any(trace.addrs[~is_mem] != 0):
        raise TraceError("only loads/stores carry a data address")

    depth = 0
    for i, k in enumerate(kinds):
        if k == KIND_REGION_BEGIN:
            depth += 1
            if depth > 1:
                raise TraceError("nested region markers", line=i + 1)
        elif k == KIND_REGION_END:
            depth -= 1
            if depth < 0:
                raise TraceError("unbalanced region markers", line=i + 1)
    if depth != 0:
        raise TraceError("unbalanced region markers (region never closed)")


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------

def _parse_addr(tok, what, line_no):
    if not tok.lower().startswith("0x"):
        raise TraceError(f"{what} must be 0x-prefixed hex, got {tok!r}", line=line_no)
    try:
        return int(tok, 16)
    except ValueError:
        raise TraceError(f"non-hex {what} {tok!r}", line=line_no) from None


def _parse_int(tok, what, line_no):
    try:
        return int(tok, 0)
    except ValueError:
        raise TraceError(f"bad {what} {tok!r}", line=line_no) from None


def _parse_srcs(tok, line_no):
    if tok == ";":
        return ()
    srcs = tuple(_parse_int(t, "source register id", line_no) for t in tok.split(","))
    if len(srcs) > MAX_SRC_REGS:
        raise TraceError(f"more than {MAX_SRC_REGS} source registers", line=line_no)
    if any(s < 0 for s in srcs):
        raise TraceError("negative source register id", line=line_no)
    return srcs


def parse_trace(stream):
    """Parse the text trace format into a :class:`Trace`.

    ``stream`` may be a str, bytes, or a file-like object. Raises
    :class:`TraceError` with the offending line number on malformed input.
    """
    if isinstance(stream, bytes):
        text = stream.decode("utf-8")
    elif isinstance(stream, str):
        text = stream
    else:
        text = stream.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")

    meta = TraceMeta()
    events = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        rec = toks[0]
        if rec == "T":
            if events:
                raise TraceError("header line must precede all records", line=line_no)
            for tok in toks[1:]:
                if "=" not in tok:
                    raise TraceError(f"bad header field {tok!r}", line=line_no)
                key, val = tok.split("=", 1)
                if key == "name":
                    meta.name = val
                elif key == "seed":
                    meta.seed = _parse_int(val, "seed", line_no)
                else:
                    raise TraceError(f"unknown header field {key!r}", line=line_no)
        elif rec == "B":
            events.append(TraceEvent(kind="region_begin"))
        elif rec == "E":
            events.append(TraceEvent(kind="region_end"))
        elif rec == "I":
            if len(toks) != 4:
                raise TraceError("instr record needs: I <pc> <dst_regs> <srcs>", line=line_no)
            events.append(TraceEvent(
                kind="instr",
                pc=_parse_addr(toks[1], "pc", line_no),
                dst_regs=_parse_int(toks[2], "dst_regs", line_no),
                src_regs=_parse_srcs(toks[3], line_no),
            ))
        elif rec in ("L", "S"):
            if len(toks) != 6:
                raise TraceError(f"{rec} record needs: {rec} <pc> <addr> <size> <dst_regs> <srcs>",
                                 line=line_no)
            size = _parse_int(toks[3], "size", line_no)
            dst = _parse_int(toks[4], "dst_regs", line_no)
            if rec == "S" and dst != 0:
                raise TraceError("store dst_regs must be 0", line=line_no)
            events.append(TraceEvent(
                kind="load" if rec == "L" else "store",
                pc=_parse_addr(toks[1], "pc", line_no),
                addr=_parse_addr(toks[2], "data address", line_no),
                size=size,
                dst_regs=dst,
                src_regs=_parse_srcs(toks[5], line_no),
            ))
        else:
            raise TraceError(f"unknown record kind {rec!r}", line=line_no)

    try:
        return Trace.from_events(events, meta)
    except TraceError:
        # re-derive marker errors with line numbers from the raw record stream
        _raise_marker_error_with_lines(text)
        raise


def _raise_marker_error_with_lines(text):
    depth = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        rec = line.split()[0]
        if rec == "B":
            depth += 1
            if depth > 1:
                raise TraceError("nested region markers", line=line_no)
        elif rec == "E":
            depth -= 1
            if depth < 0:
                raise TraceError("unbalanced region markers", line=line_no)


def trace_to_text(trace):
    """Serialize a trace to the text format. Inverse of :func:`parse_trace`."""
    out = io.StringIO()
    if trace.meta.name:
        out.write(f"T name={trace.meta.name} seed={trace.meta.seed}\n")
    for i in range(len(trace)):
        k = trace.kinds[i]
        if k == KIND_REGION_BEGIN:
            out.write("B\n")
        elif k == KIND_REGION_END:
            out.write("E\n")
        else:
            srcs = [int(s) for s in trace.srcs[i] if s >= 0]
            stok = ",".join(str(s) for s in srcs) if srcs else ";"
            pc = int(trace.pcs[i])
            if k == KIND_INSTR:
                out.write(f"I 0x{pc:x} {int(trace.dsts[i])} {stok}\n")
            else:
                rec = "L" if k == KIND_LOAD else "S"
                out.write(f"{rec} 0x{pc:x} 0x{int(trace.addrs[i]):x} "
                          f"{int(trace.sizes[i])} {int(trace.dsts[i])} {stok}\n")
    return out.getvalue()


def save_trace(trace, path):
    with open(path, "w") as f:
        f.write(trace_to_text(trace))


def load_trace(path):
    with open(path) as f:
        return parse_trace(f)


def region_filter(trace):
    """Keep only events strictly inside region markers.

    With no markers the trace passes through unchanged; markers themselves are
    always dropped. Idempotent. Multiple balanced regions concatenate.
    """
    kinds = trace.kinds
    begins = kinds == KIND_REGION_BEGIN
    if not begins.any():
        return trace
    ends = kinds == KIND_REGION_END
    depth = np.cumsum(begins.astype(np.int8) - ends.astype(np.int8))
    keep = (depth == 1) & ~begins
    return Trace(trace.kinds[keep], trace.pcs[keep], trace.addrs[keep],
                 trace.sizes[keep], trace.dsts[keep], trace.srcs[keep], trace.meta)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------
#
# All generators emit one region wrapping the whole body, a small looping
# code footprint for pcs, and at most one destination register per event so
# the rename free list saturates at arch_regs + rob_size in-flight writers.
# Destination arch ids follow the pipeline's round-robin convention (the k-th
# destination written inside the region maps to arch id k % arch_regs), which
# is how the generators express load-use dependence chains.


class _Builder:
    """Accumulates body events and tracks the round-robin destination ids."""

    def __init__(self, arch_regs, n_body):
        self.arch = arch_regs
        self.kinds = np.zeros(n_body, np.uint8)
        self.pcs = np.zeros(n_body, np.uint64)
        self.addrs = np.zeros(n_body, np.uint64)
        self.sizes = np.zeros(n_body, np.uint16)
        self.dsts = np.zeros(n_body, np.uint8)
        self.srcs = np.full((n_body, MAX_SRC_REGS), -1, np.int16)
        self.i = 0
        self.dst_count = 0

    def emit(self, kind, pc, addr=0, size=0, dst_regs=0, src_regs=()):
        i = self.i
        self.kinds[i] = kind
        self.pcs[i] = pc
        self.addrs[i] = addr
        self.sizes[i] = size
        self.dsts[i] = dst_regs
        for j, s in enumerate(src_regs):
            self.srcs[i, j] = s
        first_id = self.dst_count % self.arch
        self.dst_count += dst_regs
        self.i += 1
        return first_id if dst_regs else -1

    def finish(self, meta):
        assert self.i == len(self.kinds)
        n = self.i
        kinds = np.empty(n + 2, np.uint8)
        kinds[0] = KIND_REGION_BEGIN
        kinds[1:-1] = self.kinds
        kinds[-1] = KIND_REGION_END

        def pad(arr, fill=0):
            out = np.full((n + 2,) + arr.shape[1:], fill, arr.dtype)
            out[1:-1] = arr
            return out

        return Trace(kinds, pad(self.pcs), pad(self.addrs), pad(self.sizes),
                     pad(self.dsts), pad(self.srcs, -1), meta)


def _check_pow2(value, what):
    if value < 1 or value & (value - 1):
        raise ValueError(f"{what} must be a power of two, got {value}")


def gen_pointer_chase(working_set_bytes, node_bytes, n_events, seed,
                      instr_ratio=DEFAULT_INSTR_RATIO, arch_regs=DEFAULT_ARCH_REGS):
    """Dependent pointer chase over a random Hamiltonian cycle.

    ``n_events`` loads walk a seeded random cycle over
    ``working_set_bytes / node_bytes`` nodes; each load's address register is
    the previous load's destination, so misses serialize. ``instr_ratio``
    filler instructions follow each load and consume the loaded value.
    """
    if node_bytes < 8:
        raise ValueError("node_bytes must be >= 8")
    if working_set_bytes < node_bytes:
        raise ValueError("working_set_bytes must be >= node_bytes")
    if working_set_bytes % node_bytes:
        raise ValueError("node_bytes must divide working_set_bytes")
    if n_events < 1:
        raise ValueError("n_events must be >= 1")

    n_nodes = working_set_bytes // node_bytes
    rng = np.random.default_rng(seed)
    cycle = rng.permutation(n_nodes)

    body = n_events * (1 + instr_ratio)
    b = _Builder(arch_regs, body)
    code_len = (1 + instr_ratio) * 4
    prev_dst = -1
    for k in range(n_events):
        pc = _CODE_BASE + (k * (1 + instr_ratio) * 4) % code_len
        addr = _DATA_BASE + int(cycle[k % n_nodes]) * node_bytes
        srcs = (prev_dst,) if prev_dst >= 0 else ()
        prev_dst = b.emit(KIND_LOAD, pc, addr=addr, size=8, dst_regs=1, src_regs=srcs)
        chain = prev_dst
        for j in range(instr_ratio):
            chain = b.emit(KIND_INSTR, pc + 4 * (j + 1), dst_regs=1, src_regs=(chain,))
    meta = TraceMeta(
        name=f"chase-ws{working_set_bytes}-node{node_bytes}", seed=seed,
        params={"working_set_bytes": working_set_bytes, "node_bytes": node_bytes,
                "n_events": n_events, "instr_ratio": instr_ratio, "arch_regs": arch_regs},
    )
    return b.finish(meta)


def gen_streaming(footprint_bytes, stride_bytes, n_events, seed,
                  instr_ratio=DEFAULT_INSTR_RATIO, arch_regs=DEFAULT_ARCH_REGS):
    """Software-pipelined payload sweep: alternating loads/stores at a stride.

    Memory event k touches ``base + (k * stride) % footprint``. The filler
    instructions between memory events chain off the *previous* load's value
    (the current load's data is still in flight), and each store writes the
    processed chain back. Independent work behind an outstanding miss is what
    lets rename-register pressure surface on this archetype. Exactly
    ``n_events`` memory events; pure arithmetic, ``seed`` recorded only.
    """
    if stride_bytes < 1:
        raise ValueError("stride_bytes must be >= 1")
    if footprint_bytes < stride_bytes:
        raise ValueError("footprint_bytes must be >= stride_bytes")
    if n_events < 1:
        raise ValueError("n_events must be >= 1")

    body = n_events * (1 + instr_ratio)
    b = _Builder(arch_regs, body)
    code_len = 2 * (1 + instr_ratio) * 4
    prev_load = -1
    cur_load = -1
    chain = -1
    for k in range(n_events):
        pc = _CODE_BASE + (k * (1 + instr_ratio) * 4) % code_len
        addr = _DATA_BASE + (k * stride_bytes) % footprint_bytes
        if k % 2 == 0:
            d = b.emit(KIND_LOAD, pc, addr=addr, size=8, dst_regs=1)
            prev_load, cur_load = cur_load, d
            chain = prev_load
        else:
            srcs = (chain,) if chain >= 0 else ()
            b.emit(KIND_STORE, pc, addr=addr, size=8, src_regs=srcs)
        for j in range(instr_ratio):
            srcs = (chain,) if chain >= 0 else ()
            chain = b.emit(KIND_INSTR, pc + 4 * (j + 1), dst_regs=1, src_regs=srcs)
    meta = TraceMeta(
        name=f"stream-fp{footprint_bytes}-stride{stride_bytes}", seed=seed,
        params={"footprint_bytes": footprint_bytes, "stride_bytes": stride_bytes,
                "n_events": n_events, "instr_ratio": instr_ratio, "arch_regs": arch_regs},
    )
    return b.finish(meta)


def _mix64(x):
    # splitmix64 finalizer; deterministic bucket placement without an RNG
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


def gen_hash_lookup(table_bytes, n_flows, n_events, seed,
                    instr_ratio=DEFAULT_INSTR_RATIO, arch_regs=DEFAULT_ARCH_REGS):
    """Zipf(1.0)-skewed flow-table lookups: bucket line then chained node line.

    Each of the ``n_events`` lookups picks a flow rank by exact inverse-CDF
    sampling of the finite Zipf(1.0) distribution, loads the flow's bucket
    line and then its chained node line (dependent on the bucket load).
    """
    if n_flows < 1:
        raise ValueError("n_flows must be >= 1")
    if table_bytes < 64 * n_flows:
        raise ValueError("table_bytes must be >= 64 * n_flows")
    if n_events < 1:
        raise ValueError("n_events must be >= 1")

    rng = np.random.default_rng(seed)
    weights = 1.0 / np.arange(1, n_flows + 1)
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    flows = np.searchsorted(cdf, rng.random(n_events), side="right")

    n_lines = table_bytes // 64
    half = max(n_lines // 2, 1)
    bucket_line = np.array([_mix64(int(f)) % half for f in range(n_flows)], np.int64)
    node_line = np.array([half + _mix64(int(f) ^ 0x5BD1E995) % (n_lines - half)
                          for f in range(n_flows)], np.int64) if n_lines > half else bucket_line

    body = n_events * 2 * (1 + instr_ratio)
    b = _Builder(arch_regs, body)
    code_len = 2 * (1 + instr_ratio) * 4
    for k in range(n_events):
        f = int(flows[k])
        pc = _CODE_BASE + (k * 2 * (1 + instr_ratio) * 4) % code_len
        bucket = b.emit(KIND_LOAD, pc, addr=_DATA_BASE + int(bucket_line[f]) * 64,
                        size=8, dst_regs=1)
        chain = bucket
        for j in range(instr_ratio):
            chain = b.emit(KIND_INSTR, pc + 4 * (j + 1), dst_regs=1, src_regs=(chain,))
        node = b.emit(KIND_LOAD, pc + 4 * (1 + instr_ratio),
                      addr=_DATA_BASE + int(node_line[f]) * 64, size=8, dst_regs=1,
                      src_regs=(bucket,))
        chain = node
        for j in range(instr_ratio):
            chain = b.emit(KIND_INSTR, pc + 4 * (instr_ratio + 2 + j), dst_regs=1,
                           src_regs=(chain,))
    meta = TraceMeta(
        name=f"hash-t{table_bytes}-f{n_flows}", seed=seed,
        params={"table_bytes": table_bytes, "n_flows": n_flows, "n_events": n_events,
                "instr_ratio": instr_ratio, "arch_regs": arch_regs},
    )
    return b.finish(meta)
