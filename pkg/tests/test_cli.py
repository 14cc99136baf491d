import json
import subprocess
import sys

import pytest

from kneedse.cli import main
from kneedse.tracegen import load_trace, save_trace, gen_hash_lookup

CHASE = ["gen", "chase", "--ws", "32768", "--node", "64", "--n", "2000", "--seed", "7"]

SWEEP_CFG = {
    "l1_sizes": [4096, 8192],
    "l2_sizes": [16384],
    "rf_sizes": [24, 48],
    "epsilon": 0.03,
    "fixed": {"mem_latency_cycles": 50},
    "timing": {"mode": "analytic"},
}

SIM_CFG = {
    "hierarchy": {
        "l1i": {"size_bytes": 4096, "line_bytes": 64, "assoc": 4},
        "l1d": {"size_bytes": 4096, "line_bytes": 64, "assoc": 4},
        "l2": {"size_bytes": 32768, "line_bytes": 64, "assoc": 8},
        "mem_latency_cycles": 50,
    },
    "pipeline": {"phys_regs": 80},
    "timing": {"mode": "analytic"},
}


@pytest.fixture
def trace_file(tmp_path):
    path = tmp_path / "t.trace"
    save_trace(gen_hash_lookup(32768, 32, 300, seed=3), path)
    return path


def write_json(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return path


class TestGen:
    def test_roundtrip(self, tmp_path, capsys):
        out = tmp_path / "chase.trace"
        assert main(CHASE + ["-o", str(out)]) == 0
        t = load_trace(out)
        assert len(t) >= 2000
        assert "wrote" in capsys.readouterr().out

    def test_determinism(self, tmp_path):
        a, b = tmp_path / "a.trace", tmp_path / "b.trace"
        main(CHASE + ["-o", str(a)])
        main(CHASE + ["-o", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_invalid_params_exit_1(self, tmp_path, capsys):
        rc = main(["gen", "chase", "--ws", "100", "--node", "64", "--n", "10",
                   "-o", str(tmp_path / "x.trace")])
        assert rc == 1
        assert "error" in capsys.readouterr().err

    def test_io_failure_exit_2(self, tmp_path):
        rc = main(CHASE + ["-o", str(tmp_path / "nosuchdir" / "x.trace")])
        assert rc == 2


class TestSim:
    def test_prints_result_json(self, tmp_path, trace_file, capsys):
        cfg = write_json(tmp_path, "sim.json", SIM_CFG)
        assert main(["sim", "--config", str(cfg), "--trace", str(trace_file)]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["cycles"] >= doc["instructions"] > 0
        assert {r["cause"] for r in doc["stall_breakdown"]} == {"rename", "rob", "mem", "busy"}

    def test_missing_trace_exit_2(self, tmp_path):
        cfg = write_json(tmp_path, "sim.json", SIM_CFG)
        assert main(["sim", "--config", str(cfg), "--trace", str(tmp_path / "no.trace")]) == 2

    def test_bad_pipeline_config_exit_1(self, tmp_path, trace_file, capsys):
        bad = dict(SIM_CFG, pipeline={"phys_regs": 16, "arch_regs": 16})
        cfg = write_json(tmp_path, "sim.json", bad)
        assert main(["sim", "--config", str(cfg), "--trace", str(trace_file)]) == 1
        assert "phys_regs" in capsys.readouterr().err

    def test_malformed_trace_exit_1(self, tmp_path):
        cfg = write_json(tmp_path, "sim.json", SIM_CFG)
        bad = tmp_path / "bad.trace"
        bad.write_text("Q 0x0\n")
        assert main(["sim", "--config", str(cfg), "--trace", str(bad)]) == 1


class TestSweep:
    def test_outputs_written(self, tmp_path, trace_file):
        cfg = write_json(tmp_path, "sweep.json", SWEEP_CFG)
        out = tmp_path / "out"
        rc = main(["sweep", "--config", str(cfg), "--trace", str(trace_file),
                   "--two-phase", "-o", str(out)])
        assert rc == 0
        for name in ("results.csv", "curves.json", "summary.txt"):
            assert (out / name).exists()
        csv = (out / "results.csv").read_text().splitlines()
        assert len(csv) == 1 + 2 * 1 + 1  # header + phase1 grid + extra rf point

    def test_singleton_grid_best_equals_optimum(self, tmp_path, trace_file, capsys):
        cfg = write_json(tmp_path, "one.json",
                         dict(SWEEP_CFG, l1_sizes=[4096], l2_sizes=[16384], rf_sizes=[24]))
        out = tmp_path / "out"
        assert main(["sweep", "--config", str(cfg), "--trace", str(trace_file),
                     "--joint", "-o", str(out)]) == 0
        doc = json.load(open(out / "curves.json"))
        assert doc["best"] == doc["optimum"]

    def test_jobs_byte_identical(self, tmp_path, trace_file):
        cfg = write_json(tmp_path, "sweep.json", SWEEP_CFG)
        outs = []
        for jobs, name in ((1, "o1"), (8, "o8")):
            out = tmp_path / name
            assert main(["sweep", "--config", str(cfg), "--trace", str(trace_file),
                         "--joint", "--jobs", str(jobs), "-o", str(out)]) == 0
            outs.append(out)
        for name in ("results.csv", "curves.json"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_uncalibrated_table_exit_3(self, tmp_path, trace_file, capsys):
        table = tmp_path / "cal.csv"
        table.write_text("label,size_bytes,line_bytes,assoc,access_ns,area_mm2\n"
                         "L1I,4096,64,4,0.5,\nL1D,4096,64,4,0.5,\n")
        cfg = dict(SWEEP_CFG, timing={"mode": "table", "path": "cal.csv"})
        cfg_path = write_json(tmp_path, "sweep.json", cfg)
        rc = main(["sweep", "--config", str(cfg_path), "--trace", str(trace_file),
                   "-o", str(tmp_path / "out")])
        assert rc == 3
        assert "calibration" in capsys.readouterr().err

    def test_bad_spec_exit_1(self, tmp_path, trace_file):
        cfg = write_json(tmp_path, "sweep.json", dict(SWEEP_CFG, l1_sizes=[5000]))
        rc = main(["sweep", "--config", str(cfg), "--trace", str(trace_file),
                   "-o", str(tmp_path / "out")])
        assert rc == 1

    def test_epsilon_flag_overrides(self, tmp_path, trace_file):
        cfg = write_json(tmp_path, "sweep.json", SWEEP_CFG)
        out = tmp_path / "out"
        assert main(["sweep", "--config", str(cfg), "--trace", str(trace_file),
                     "--epsilon", "0.5", "-o", str(out)]) == 0
        doc = json.load(open(out / "curves.json"))
        assert doc["epsilon"] == 0.5


class TestReport:
    def test_reprint_from_curves(self, tmp_path, trace_file, capsys):
        cfg = write_json(tmp_path, "sweep.json", SWEEP_CFG)
        out = tmp_path / "out"
        main(["sweep", "--config", str(cfg), "--trace", str(trace_file), "-o", str(out)])
        capsys.readouterr()
        assert main(["report", str(out / "curves.json")]) == 0
        text = capsys.readouterr().out
        assert "best" in text and "half-of-best" in text


def test_console_entrypoint_runs():
    out = subprocess.run([sys.executable, "-m", "kneedse", "--version"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert "kneedse" in out.stdout
