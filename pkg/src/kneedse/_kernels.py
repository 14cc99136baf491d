"""Hot replay kernels with numba and pure-Python backends.

The two per-event loops that dominate sweep runtime live here: the cache
hierarchy replay and the pipeline timing replay. Each is written once as a
plain function over numpy arrays; the numba backend is the same function
passed through ``@njit``. Selection happens at import via the
``KNEE_DSE_BACKEND`` environment variable:

  * ``numba`` (default) - JIT-compile the kernels; falls back to numpy with a
    warning if numba is unavailable.
  * ``numpy`` - run the plain-Python loops (slow, dependency-free semantics
    reference).

``benchmarks/bench_kernels.py`` times one against the other. Both backends
are exercised for equality in tests/test_backends.py.
"""

from __future__ import annotations

import os
import warnings

import numpy as np

# Cache levels are indexed L1I=0, L1D=1, L2=2 in the stats array; the columns
# are accesses, hits, misses, writebacks.
L1I, L1D, L2 = 0, 1, 2
ACCESSES, HITS, MISSES, WRITEBACKS = 0, 1, 2, 3


def _hierarchy_replay(kinds, pcs, addrs,
                      i_tags, i_stamp, i_dirty,
                      d_tags, d_stamp, d_dirty,
                      u_tags, u_stamp, u_dirty,
                      i_shift, d_shift, u_shift,
                      l1_lat, l2_lat, mem_lat,
                      stats, stamp_counter, ilat, dlat):
    """Replay an event stream through the two-level hierarchy.

    Each event performs an I-fetch probe at its pc; loads/stores then probe
    the data path. Serial lookup: L1 -> L2 -> memory, fill-on-miss into both
    the probed L1 and L2 (non-inclusive), LRU by monotonically increasing
    stamps, write-back/write-allocate with writebacks counted but not timed.

    Mutates the tag/stamp/dirty state arrays and ``stats`` in place, writes
    per-event latencies into ``ilat``/``dlat``, and returns the advanced LRU
    stamp counter.
    """
    n = kinds.shape[0]
    counter = stamp_counter
    for e in range(n):
        kind = kinds[e]
        for phase in range(2):
            if phase == 0:
                a = pcs[e]
                t1 = i_tags; s1 = i_stamp; dr1 = i_dirty
                sh = i_shift
                row = L1I
                is_store = False
            else:
                if kind != 1 and kind != 2:
                    break
                a = addrs[e]
                t1 = d_tags; s1 = d_stamp; dr1 = d_dirty
                sh = d_shift
                row = L1D
                is_store = kind == 2

            line = a >> sh
            n_sets = t1.shape[0]
            assoc = t1.shape[1]
            si = line & (n_sets - 1)

            stats[row, ACCESSES] += 1
            hit_way = -1
            for w in range(assoc):
                if t1[si, w] == line:
                    hit_way = w
                    break

            if hit_way >= 0:
                stats[row, HITS] += 1
                counter += 1
                s1[si, hit_way] = counter
                if is_store:
                    dr1[si, hit_way] = True
                lat = l1_lat
            else:
                stats[row, MISSES] += 1
                # L2 probe (serial after the L1 lookup)
                uline = a >> u_shift
                u_sets = u_tags.shape[0]
                u_assoc = u_tags.shape[1]
                usi = uline & (u_sets - 1)
                stats[L2, ACCESSES] += 1
                u_hit = -1
                for w in range(u_assoc):
                    if u_tags[usi, w] == uline:
                        u_hit = w
                        break
                if u_hit >= 0:
                    stats[L2, HITS] += 1
                    counter += 1
                    u_stamp[usi, u_hit] = counter
                    lat = l1_lat + l2_lat
                else:
                    stats[L2, MISSES] += 1
                    lat = l1_lat + l2_lat + mem_lat
                    # allocate in L2
                    victim = 0
                    best = u_stamp[usi, 0]
                    for w in range(u_assoc):
                        if u_tags[usi, w] == -1:
                            victim = w
                            best = -1
                            break
                        if u_stamp[usi, w] < best:
                            best = u_stamp[usi, w]
                            victim = w
                    if u_tags[usi, victim] != -1 and u_dirty[usi, victim]:
                        stats[L2, WRITEBACKS] += 1
                    counter += 1
                    u_tags[usi, victim] = uline
                    u_stamp[usi, victim] = counter
                    u_dirty[usi, victim] = False

                # allocate in the probed L1
                victim = 0
                best = s1[si, 0]
                for w in range(assoc):
                    if t1[si, w] == -1:
                        victim = w
                        best = -1
                        break
                    if s1[si, w] < best:
                        best = s1[si, w]
                        victim = w
                if t1[si, victim] != -1 and dr1[si, victim]:
                    stats[row, WRITEBACKS] += 1
                    # hand the dirty line to L2: mark dirty there if present
                    vaddr = t1[si, victim] << sh
                    vuline = vaddr >> u_shift
                    vusi = vuline & (u_tags.shape[0] - 1)
                    for w in range(u_tags.shape[1]):
                        if u_tags[vusi, w] == vuline:
                            u_dirty[vusi, w] = True
                            break
                counter += 1
                t1[si, victim] = line
                s1[si, victim] = counter
                dr1[si, victim] = is_store

            if phase == 0:
                ilat[e] = lat
            else:
                dlat[e] = lat
    return counter


def _pipeline_replay(kinds, dsts, srcs, ilat, dlat,
                     arch_regs, phys_regs, rob_size, alu_lat, l1_hit_lat):
    """Single-issue rename-limited timing replay over precomputed latencies.

    Constraint order per event (each wait attributed to exactly one cause):
    pipelined fetch baseline, I-miss wait (mem), ROB-entry wait (rob), free
    physical register wait (rename), source-operand wait (mem), blocking
    data-port wait (mem). Issue is at most one event per cycle; commit is in
    order, one per cycle. Returns (cycles, stall_rename, stall_rob,
    stall_mem).
    """
    n = kinds.shape[0]
    ready = np.zeros(arch_regs, np.int64)
    ring_commit = np.zeros(rob_size, np.int64)
    ring_dst = np.zeros(rob_size, np.int64)
    head = 0
    tail = 0
    in_flight = 0
    free_regs = phys_regs - arch_regs
    held_regs = 0
    rr = 0

    stall_rename = 0
    stall_rob = 0
    stall_mem = 0

    issue_prev = -1
    commit_prev = -1
    fetch_start_prev = 0
    fetch_done_prev = 0
    prev_ifetch_miss = False
    mem_free = 0
    cycles = 0

    for e in range(n):
        kind = kinds[e]
        if e == 0:
            fetch_start = 0
        else:
            fetch_start = fetch_start_prev + 1
            if prev_ifetch_miss and fetch_done_prev > fetch_start:
                fetch_start = fetch_done_prev
        fetch_done = fetch_start + ilat[e]

        t = issue_prev + 1
        base = fetch_start + l1_hit_lat
        if base > t:
            t = base
        if fetch_done > t:
            stall_mem += fetch_done - t
            t = fetch_done

        # release entries whose commit is already in the past
        while in_flight > 0 and ring_commit[head] < t:
            free_regs += ring_dst[head]
            held_regs -= ring_dst[head]
            head = (head + 1) % rob_size
            in_flight -= 1

        # ROB entry
        if in_flight >= rob_size:
            avail = ring_commit[head] + 1
            if avail > t:
                stall_rob += avail - t
                t = avail
            free_regs += ring_dst[head]
            held_regs -= ring_dst[head]
            head = (head + 1) % rob_size
            in_flight -= 1

        # physical registers for the destinations
        d = dsts[e]
        while free_regs < d:
            avail = ring_commit[head] + 1
            if avail > t:
                stall_rename += avail - t
                t = avail
            free_regs += ring_dst[head]
            held_regs -= ring_dst[head]
            head = (head + 1) % rob_size
            in_flight -= 1

        # source operands (produced by in-flight loads -> memory wait)
        src_ready = 0
        for j in range(srcs.shape[1]):
            s = srcs[e, j]
            if s >= 0 and ready[s] > src_ready:
                src_ready = ready[s]
        if src_ready > t:
            stall_mem += src_ready - t
            t = src_ready

        is_mem = kind == 1 or kind == 2
        if is_mem and mem_free > t:
            stall_mem += mem_free - t
            t = mem_free

        issue = t
        if is_mem:
            lat = dlat[e]
        else:
            lat = alu_lat
        complete = issue + lat
        if is_mem:
            mem_free = complete

        commit = complete
        if commit_prev + 1 > commit:
            commit = commit_prev + 1

        free_regs -= d
        held_regs += d
        for k in range(d):
            ready[(rr + k) % arch_regs] = complete
        rr = (rr + d) % arch_regs

        ring_commit[tail] = commit
        ring_dst[tail] = d
        tail = (tail + 1) % rob_size
        in_flight += 1

        # rename conservation: free + live mappings + in-flight previous
        # mappings account for every physical register
        assert free_regs + arch_regs + held_regs == phys_regs

        issue_prev = issue
        commit_prev = commit
        fetch_start_prev = fetch_start
        fetch_done_prev = fetch_done
        prev_ifetch_miss = ilat[e] > l1_hit_lat
        cycles = commit

    return cycles, stall_rename, stall_rob, stall_mem


def _select_backend():
    choice = os.environ.get("KNEE_DSE_BACKEND", "numba").strip().lower()
    if choice not in ("numba", "numpy"):
        raise ValueError(f"KNEE_DSE_BACKEND must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numpy":
        return "numpy", _hierarchy_replay, _pipeline_replay
    try:
        from numba import njit
    except ImportError:
        warnings.warn("numba unavailable; falling back to the numpy backend")
        return "numpy", _hierarchy_replay, _pipeline_replay
    jit = njit(cache=True, fastmath=False)
    return "numba", jit(_hierarchy_replay), jit(_pipeline_replay)


BACKEND, hierarchy_replay, pipeline_replay = _select_backend()


def active_backend():
    """Name of the kernel backend selected at import ('numba' or 'numpy')."""
    return BACKEND
