import math
import random

import pytest

from kneedse.cachesim import CacheGeometry, HierarchyConfig
from kneedse.timing import (AreaProxy, TimingModel, TimingTableError,
                            UncalibratedGeometryError, access_time_ns, area_proxy,
                            cycles_for, load_timing_table)


def geom(size, line=64, assoc=4, label="L1D"):
    return CacheGeometry(size, line, assoc, label)


class TestAnalytic:
    def test_anchor_point_is_t0(self):
        m = TimingModel()
        assert access_time_ns(m, geom(4096, assoc=1)) == pytest.approx(m.t0)

    def test_doubling_size_increases_time(self):
        rng = random.Random(3)
        for _ in range(50):
            a = rng.uniform(0, 0.2)
            b = rng.uniform(0.001, 0.5)
            m = TimingModel(a=a, b=b)
            size = 4096 << rng.randrange(0, 8)
            t1 = access_time_ns(m, geom(size))
            t2 = access_time_ns(m, geom(size * 2))
            assert t2 > t1

    def test_monotone_across_default_grid(self):
        m = TimingModel()
        times = [access_time_ns(m, geom(s)) for s in
                 (4096, 8192, 16384, 32768, 65536, 131072, 262144)]
        assert times == sorted(times)
        assert len(set(times)) == len(times)

    def test_assoc_increases_time(self):
        m = TimingModel()
        assert (access_time_ns(m, geom(32768, assoc=8))
                > access_time_ns(m, geom(32768, assoc=4)))

    def test_floor_at_t0(self):
        m = TimingModel()
        assert access_time_ns(m, geom(2048, line=64, assoc=1)) == m.t0

    def test_negative_coefficients_rejected(self):
        with pytest.raises(ValueError):
            TimingModel(a=-0.1)


class TestCyclesFor:
    def test_ceiling(self):
        m = TimingModel(cycle_ns=1.0)
        assert cycles_for(m, 2.4) == 3

    def test_exact_fit(self):
        m = TimingModel(cycle_ns=1.0)
        assert cycles_for(m, 1.0) == 1

    def test_minimum_one(self):
        m = TimingModel(cycle_ns=1.0)
        assert cycles_for(m, 0.3) == 1

    def test_non_positive_rejected(self):
        m = TimingModel()
        with pytest.raises(ValueError):
            cycles_for(m, 0.0)
        with pytest.raises(ValueError):
            cycles_for(m, -1.0)

    def test_monotone_in_ns(self):
        m = TimingModel(cycle_ns=0.7)
        prev = 0
        for k in range(1, 100):
            c = cycles_for(m, k * 0.13)
            assert c >= prev and c >= 1
            prev = c


HEADER = "label,size_bytes,line_bytes,assoc,access_ns,area_mm2"


class TestTable:
    def test_empty_table_always_uncalibrated(self):
        m = load_timing_table(HEADER + "\n")
        with pytest.raises(UncalibratedGeometryError):
            access_time_ns(m, geom(65536))

    def test_single_row_exact_match(self):
        m = load_timing_table(HEADER + "\nL1D,65536,64,4,2.4,0.8\n")
        assert access_time_ns(m, geom(65536)) == 2.4
        with pytest.raises(UncalibratedGeometryError):
            access_time_ns(m, geom(131072))
        with pytest.raises(UncalibratedGeometryError):
            access_time_ns(m, geom(65536, label="L1I"))

    def test_duplicate_key_rejected(self):
        text = HEADER + "\nL1D,65536,64,4,2.4,\nL1D,65536,64,4,2.5,\n"
        with pytest.raises(TimingTableError) as exc:
            load_timing_table(text)
        assert exc.value.line == 3

    def test_non_positive_time_rejected(self):
        with pytest.raises(TimingTableError):
            load_timing_table(HEADER + "\nL1D,65536,64,4,0.0,\n")

    def test_parse_error_carries_line(self):
        with pytest.raises(TimingTableError) as exc:
            load_timing_table(HEADER + "\nL1D,notanint,64,4,1.0,\n")
        assert exc.value.line == 2

    def test_bad_header_rejected(self):
        with pytest.raises(TimingTableError):
            load_timing_table("size,ns\n1,2\n")

    def test_empty_area_column(self):
        m = load_timing_table(HEADER + "\nL2,131072,64,8,3.1,\n")
        assert access_time_ns(m, geom(131072, assoc=8, label="L2")) == 3.1


def hier(l1=65536, l2=131072):
    return HierarchyConfig(
        CacheGeometry(l1, 64, 4, "L1I"),
        CacheGeometry(l1, 64, 4, "L1D"),
        CacheGeometry(l2, 64, 8, "L2"),
        1, 2, 50,
    )


class TestAreaProxy:
    def test_golden_demo_value(self):
        # 64KB L1s: 524288 data + 1024 lines * (50 tag + 2 status) = 577536 each
        # 128KB L2: 1048576 + 2048 * 52 = 1155072; RF 80*64 = 5120
        proxy = area_proxy(hier(), 80)
        assert proxy.bits == 2 * 577536 + 1155072 + 5120 == 2315264

    def test_rf_growth_is_exact(self):
        d = area_proxy(hier(), 80).bits - area_proxy(hier(), 64).bits
        assert d == 16 * 64 == 1024

    def test_monotone_in_each_dimension(self):
        base = area_proxy(hier(), 80).bits
        assert area_proxy(hier(l2=262144), 80).bits > base
        assert area_proxy(hier(l1=131072, l2=262144), 80).bits > base
        assert area_proxy(hier(), 81).bits > base

    def test_mm2_from_table(self):
        rows = [
            "L1I,65536,64,4,1.2,0.5",
            "L1D,65536,64,4,1.2,0.5",
            "L2,131072,64,8,1.6,1.25",
        ]
        m = load_timing_table(HEADER + "\n" + "\n".join(rows) + "\n")
        proxy = area_proxy(hier(), 80, model=m)
        assert proxy.mm2 == pytest.approx(2.25)

    def test_mm2_missing_rows_gives_none(self):
        m = load_timing_table(HEADER + "\nL1D,65536,64,4,1.2,0.5\n")
        assert area_proxy(hier(), 80, model=m).mm2 is None

    def test_ordering_by_bits(self):
        assert AreaProxy(10) < AreaProxy(11)
