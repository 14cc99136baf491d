import numpy as np
import pytest

from kneedse.tracegen import (Trace, TraceError, TraceEvent, gen_hash_lookup,
                              gen_pointer_chase, gen_streaming, parse_trace,
                              region_filter, trace_to_text)

DATA_BASE = 0x10000000


def test_parse_empty_stream():
    t = parse_trace("")
    assert len(t) == 0


def test_parse_single_instr():
    t = parse_trace("I 0x401000 1 ;")
    assert len(t) == 1
    ev = t[0]
    assert ev.kind == "instr"
    assert ev.pc == 0x401000
    assert ev.dst_regs == 1
    assert ev.src_regs == ()


def test_parse_load_store():
    t = parse_trace("L 0x401000 0x1000 8 1 2,3\nS 0x401004 0x1008 8 0 1\n")
    assert t[0].kind == "load" and t[0].addr == 0x1000 and t[0].src_regs == (2, 3)
    assert t[1].kind == "store" and t[1].dst_regs == 0 and t[1].src_regs == (1,)


def test_parse_unbalanced_markers_line_number():
    with pytest.raises(TraceError) as exc:
        parse_trace("B\nI 0x401000 0 ;\nE\nE")
    assert exc.value.line == 4
    assert "unbalanced" in str(exc.value)


def test_parse_nested_markers():
    with pytest.raises(TraceError) as exc:
        parse_trace("B\nB\nE\nE")
    assert exc.value.line == 2


def test_parse_region_never_closed():
    with pytest.raises(TraceError, match="unbalanced"):
        parse_trace("B\nI 0x401000 0 ;")


def test_parse_non_hex_address():
    with pytest.raises(TraceError) as exc:
        parse_trace("I 4198400 1 ;")
    assert exc.value.line == 1


def test_parse_unknown_record():
    with pytest.raises(TraceError, match="unknown record"):
        parse_trace("X 0x1 2 3")


def test_parse_store_with_dst_rejected():
    with pytest.raises(TraceError, match="store dst_regs"):
        parse_trace("S 0x401000 0x1000 8 1 ;")


def test_parse_comments_and_header():
    text = "# a trace\nT name=demo seed=42\nI 0x401000 1 ;  # trailing\n"
    t = parse_trace(text)
    assert t.meta.name == "demo"
    assert t.meta.seed == 42
    assert len(t) == 1


def test_parse_bad_size():
    with pytest.raises(TraceError):
        parse_trace("L 0x401000 0x1000 7 1 ;")
    with pytest.raises(TraceError):
        parse_trace("L 0x401000 0x1000 128 1 ;")


def test_from_events_rejects_three_dsts():
    with pytest.raises(TraceError):
        Trace.from_events([TraceEvent(kind="instr", pc=0x100, dst_regs=3)])


def test_region_filter_no_markers_passthrough():
    t = parse_trace("\n".join(f"I 0x{0x400000 + 4 * i:x} 1 ;" for i in range(5)))
    assert region_filter(t) == t


def test_region_filter_strict_interior():
    text = "I 0x1 1 ;\nB\nI 0x2 1 ;\nI 0x3 1 ;\nE\nI 0x4 1 ;"
    got = region_filter(parse_trace(text))
    assert [ev.pc for ev in got.events()] == [0x2, 0x3]


def test_region_filter_empty_region():
    assert len(region_filter(parse_trace("B\nE"))) == 0


def test_region_filter_idempotent():
    t = gen_hash_lookup(4096, 4, 50, seed=5)
    once = region_filter(t)
    twice = region_filter(once)
    assert once == twice


def test_region_filter_multiple_regions_concatenate():
    text = "B\nI 0x1 1 ;\nE\nI 0x2 1 ;\nB\nI 0x3 1 ;\nE"
    got = region_filter(parse_trace(text))
    assert [ev.pc for ev in got.events()] == [0x1, 0x3]


@pytest.mark.parametrize("make", [
    lambda: gen_pointer_chase(4096, 64, 200, seed=3),
    lambda: gen_streaming(8192, 64, 200, seed=4),
    lambda: gen_hash_lookup(65536, 32, 100, seed=5),
])
def test_generator_roundtrip_through_text(make):
    t = make()
    assert parse_trace(trace_to_text(t)) == t


@pytest.mark.parametrize("make", [
    lambda s: gen_pointer_chase(2048, 8, 300, seed=s),
    lambda s: gen_streaming(4096, 16, 300, seed=s),
    lambda s: gen_hash_lookup(8192, 16, 150, seed=s),
])
def test_generator_determinism(make):
    assert trace_to_text(make(9)) == trace_to_text(make(9))


class TestPointerChase:
    def test_covers_all_nodes_once(self):
        t = gen_pointer_chase(64, 8, 8, seed=1)
        addrs = [ev.addr for ev in t.events() if ev.kind == "load"]
        assert len(addrs) == 8
        assert sorted(addrs) == [DATA_BASE + 8 * i for i in range(8)]

    def test_distinct_addresses_match_node_count(self):
        t = gen_pointer_chase(1024, 64, 200, seed=2)
        addrs = {ev.addr for ev in t.events() if ev.kind == "load"}
        assert len(addrs) == 1024 // 64

    def test_loads_form_dependence_chain(self):
        t = gen_pointer_chase(512, 8, 20, seed=0, instr_ratio=2, arch_regs=16)
        body = list(region_filter(t).events())
        dst_counter = 0
        prev_load_dst = None
        for ev in body:
            if ev.kind == "load" and prev_load_dst is not None:
                assert ev.src_regs == (prev_load_dst,)
            if ev.kind == "load":
                prev_load_dst = dst_counter % 16
            dst_counter += ev.dst_regs

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            gen_pointer_chase(100, 64, 10, seed=0)   # not divisible
        with pytest.raises(ValueError):
            gen_pointer_chase(64, 4, 10, seed=0)     # node too small
        with pytest.raises(ValueError):
            gen_pointer_chase(64, 8, 0, seed=0)


class TestStreaming:
    def test_arithmetic_offsets(self):
        t = gen_streaming(64, 16, 4, seed=0)
        mem = [ev for ev in t.events() if ev.is_mem]
        assert [ev.addr - DATA_BASE for ev in mem] == [0, 16, 32, 48]

    def test_alternates_load_store(self):
        t = gen_streaming(1024, 64, 6, seed=0)
        kinds = [ev.kind for ev in t.events() if ev.is_mem]
        assert kinds == ["load", "store", "load", "store", "load", "store"]

    def test_exact_memory_event_count(self):
        for n in (1, 7, 100):
            t = gen_streaming(4096, 32, n, seed=1)
            assert t.n_mem_events == n

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            gen_streaming(8, 16, 4, seed=0)          # footprint < stride
        with pytest.raises(ValueError):
            gen_streaming(64, 0, 4, seed=0)


class TestHashLookup:
    def test_single_flow_touches_two_lines(self):
        t = gen_hash_lookup(4096, 1, 10, seed=3)
        lines = {ev.addr >> 6 for ev in t.events() if ev.is_mem}
        assert len(lines) == 2

    def test_zipf_head_dominates(self):
        # top-ranked flow should take > 5% of lookups under Zipf(1.0)
        t = gen_hash_lookup(1 << 20, 4096, 100_000, seed=9)
        loads = [ev.addr for ev in t.events() if ev.kind == "load"]
        buckets = loads[::2]  # bucket line of each lookup
        top = max(np.unique(buckets, return_counts=True)[1])
        assert top / len(buckets) > 0.05

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            gen_hash_lookup(64, 2, 10, seed=0)       # table too small
        with pytest.raises(ValueError):
            gen_hash_lookup(4096, 0, 10, seed=0)
