"""Command-line front end: generate traces, simulate, sweep, re-report.

Exit codes are a stable contract: 0 success, 1 validation error, 2 I/O
error, 3 uncalibrated geometry in table timing mode. ``KNEE_DSE_JOBS`` sets
the default sweep parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from ._kernels import active_backend
from .cachesim import CacheGeometry, ConfigError, HierarchyConfig
from .pipeline import PipelineConfig, PipelineConfigError, simulate, stall_breakdown
from .report import emit_csv, emit_curves_json, emit_summary, load_curves_json
from .sweep import SweepSpecError, explore, load_spec, timing_from_config
from .timing import UncalibratedGeometryError, access_time_ns, cycles_for
from .tracegen import (TraceError, gen_hash_lookup, gen_pointer_chase, gen_streaming,
                       load_trace, save_trace)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_UNCALIBRATED = 3

_VALIDATION_ERRORS = (TraceError, ConfigError, PipelineConfigError, SweepSpecError,
                      ValueError, KeyError, TypeError)


def _default_jobs():
    try:
        return max(1, int(os.environ.get("KNEE_DSE_JOBS", "1")))
    except ValueError:
        return 1


def _build_parser():
    p = argparse.ArgumentParser(prog="kneedse",
                                description="Cache and register-file design-space explorer")
    p.add_argument("--version", action="version", version=f"kneedse {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic workload trace")
    gsub = g.add_subparsers(dest="kind", required=True)

    chase = gsub.add_parser("chase", help="dependent pointer chase (graph-walk archetype)")
    chase.add_argument("--ws", type=int, required=True, help="working set bytes")
    chase.add_argument("--node", type=int, default=64, help="node bytes (default 64)")
    stream = gsub.add_parser("stream", help="streaming payload sweep (encryption archetype)")
    stream.add_argument("--footprint", type=int, required=True, help="footprint bytes")
    stream.add_argument("--stride", type=int, default=64, help="stride bytes (default 64)")
    hashp = gsub.add_parser("hash", help="Zipf flow-table lookups (classification archetype)")
    hashp.add_argument("--table", type=int, required=True, help="table bytes")
    hashp.add_argument("--flows", type=int, required=True, help="number of flows")
    for sp in (chase, stream, hashp):
        sp.add_argument("--n", type=int, required=True, help="memory events / lookups")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--instr-ratio", type=int, default=2,
                        help="instr events per memory event (default 2)")
        sp.add_argument("-o", "--out", required=True, help="output trace path")

    s = sub.add_parser("sim", help="simulate one configuration, print result JSON")
    s.add_argument("--config", required=True, help="config JSON (hierarchy/pipeline/timing)")
    s.add_argument("--trace", required=True, help="trace file")

    w = sub.add_parser("sweep", help="run a design-space sweep")
    w.add_argument("--config", required=True, help="sweep config JSON")
    w.add_argument("--trace", help="trace file (overrides config's trace path)")
    mode = w.add_mutually_exclusive_group()
    mode.add_argument("--two-phase", dest="protocol", action="store_const",
                      const="two_phase", help="caches first, then RF at best caches (default)")
    mode.add_argument("--joint", dest="protocol", action="store_const", const="joint",
                      help="full cartesian sweep")
    w.set_defaults(protocol="two_phase")
    w.add_argument("--epsilon", type=float, help="penalty band for the optimum")
    w.add_argument("--jobs", type=int, default=_default_jobs(),
                   help="parallel grid workers (default $KNEE_DSE_JOBS or 1)")
    w.add_argument("--split-l1", action="store_true",
                   help="require independent l1i_sizes/l1d_sizes from the config")
    w.add_argument("-o", "--out-dir", required=True,
                   help="directory for results.csv, curves.json, summary.txt")

    r = sub.add_parser("report", help="re-print the summary from a saved curves.json")
    r.add_argument("curves", help="curves.json from a previous sweep")
    return p


def _cmd_gen(args):
    if args.kind == "chase":
        trace = gen_pointer_chase(args.ws, args.node, args.n, args.seed,
                                  instr_ratio=args.instr_ratio)
    elif args.kind == "stream":
        trace = gen_streaming(args.footprint, args.stride, args.n, args.seed,
                              instr_ratio=args.instr_ratio)
    else:
        trace = gen_hash_lookup(args.table, args.flows, args.n, args.seed,
                                instr_ratio=args.instr_ratio)
    save_trace(trace, args.out)
    print(f"wrote {args.out}: {len(trace)} events ({trace.meta.name})")
    return EXIT_OK


def _hier_from_config(cfg):
    def geom(section, label):
        try:
            g = cfg["hierarchy"][section]
        except KeyError:
            raise SweepSpecError(f"config missing hierarchy.{section}") from None
        return CacheGeometry(g["size_bytes"], g.get("line_bytes", 64),
                             g.get("assoc", 4 if label != "L2" else 8), label)

    l1i = geom("l1i", "L1I")
    l1d = geom("l1d", "L1D")
    l2 = geom("l2", "L2")
    timing = timing_from_config(cfg.get("timing", {}))
    l1_lat = cycles_for(timing, access_time_ns(timing, l1d))
    l2_lat = cycles_for(timing, access_time_ns(timing, l2))
    mem = cfg["hierarchy"].get("mem_latency_cycles", 50)
    return HierarchyConfig(l1i, l1d, l2, l1_lat, l2_lat, mem), timing


def _cmd_sim(args):
    with open(args.config) as f:
        cfg = json.load(f)
    trace = load_trace(args.trace)
    hier, timing = _hier_from_config(cfg)
    try:
        pcfg = PipelineConfig(**cfg.get("pipeline", {}))
    except TypeError as exc:
        raise SweepSpecError(f"bad 'pipeline' section: {exc}") from None
    result = simulate(trace, pcfg, hier, timing,
                      cfg.get("reg_width_bits", 64))
    doc = result.as_dict()
    doc["stall_breakdown"] = [
        {"cause": c, "cycles": cyc, "fraction": frac}
        for c, cyc, frac in stall_breakdown(result)
    ]
    json.dump(doc, sys.stdout, indent=2)
    print()
    return EXIT_OK


def _cmd_sweep(args):
    trace = load_trace(args.trace) if args.trace else None
    spec = load_spec(args.config, trace=trace)
    if args.epsilon is not None:
        from dataclasses import replace
        spec = replace(spec, epsilon=args.epsilon)
    if args.split_l1 and not spec.split_l1:
        raise SweepSpecError("--split-l1 requires l1i_sizes and l1d_sizes in the config")

    report = explore(spec, protocol=args.protocol, jobs=args.jobs)

    os.makedirs(args.out_dir, exist_ok=True)
    with open(os.path.join(args.out_dir, "results.csv"), "w") as f:
        emit_csv(report, f)
    with open(os.path.join(args.out_dir, "curves.json"), "w") as f:
        emit_curves_json(report, f)
    with open(os.path.join(args.out_dir, "summary.txt"), "w") as f:
        emit_summary(report, f)
    with open(os.path.join(args.out_dir, "summary.txt")) as f:
        sys.stdout.write(f.read())
    print(f"[{active_backend()} backend, jobs={args.jobs}] wrote {args.out_dir}/"
          "{results.csv,curves.json,summary.txt}")
    return EXIT_OK


def _cmd_report(args):
    with open(args.curves) as f:
        doc = load_curves_json(f)
    print(f"protocol: {doc['protocol']}   epsilon: {doc['epsilon']:g}")
    print(f"best    {doc['best']}")
    print(f"optimum {doc['optimum']}")
    for c in doc["curves"]:
        pts = c["points"]
        half = pts[c["half_of_best_index"]]
        best = pts[c["best_index"]]
        print(f"{c['dimension']}: best size {best['size']}, half-of-best size "
              f"{half['size']} penalty {half['penalty'] * 100:.1f}%")
    return EXIT_OK


def main(argv=None):
    args = _build_parser().parse_args(argv)
    handlers = {"gen": _cmd_gen, "sim": _cmd_sim, "sweep": _cmd_sweep,
                "report": _cmd_report}
    try:
        return handlers[args.command](args)
    except UncalibratedGeometryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNCALIBRATED
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
