"""Serialization of sweep results: CSV, curves JSON, and the text summary.

All emitters are pure functions of the report: identical reports produce
byte-identical output. The curves JSON round-trips through
:func:`load_curves_json` for regression testing; plotting is left to external
tools (see README for a one-line matplotlib recipe).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

CSV_HEADER = ("l1,l2,rf,cycles,instructions,l1i_miss,l1d_miss,l2_miss,"
              "stall_rename,stall_rob,stall_mem,penalty,area,perf_per_area")


@dataclass
class CurveSeries:
    """Penalty curve along one swept dimension through the best point.

    ``points`` are (size, cycles, penalty, area_bits, perf_per_area) ordered
    by size ascending. Annotation indices are curve-local: ``best_index`` is
    the minimum-cycle point (area then key tie-breaks), ``optimum_index`` the
    smallest-area point within the epsilon band, ``half_of_best_index`` the
    grid point nearest half the best size (ties toward the smaller size).
    """

    dimension: str
    points: list
    keys: list
    best_index: int
    optimum_index: int
    half_of_best_index: int

    @property
    def sizes(self):
        return [p[0] for p in self.points]

    @property
    def penalty_at_half(self):
        return self.points[self.half_of_best_index][2]


def build_curve(dimension, sized_results, epsilon):
    """Assemble a CurveSeries from (size, ConfigResult) pairs.

    Penalties must already be filled (they stay relative to the global best).
    """
    if not sized_results:
        raise ValueError(f"curve {dimension!r} has no points")
    ordered = sorted(sized_results, key=lambda sr: sr[0])
    points = [(size, r.cycles, r.penalty, r.area.bits, r.perf_per_area)
              for size, r in ordered]
    keys = [r.key for _, r in ordered]
    best_index = min(range(len(ordered)),
                     key=lambda i: (ordered[i][1].cycles, ordered[i][1].area.bits,
                                    ordered[i][1].key))
    in_band = [i for i in range(len(ordered)) if ordered[i][1].penalty <= epsilon]
    optimum_index = min(in_band,
                        key=lambda i: (ordered[i][1].area.bits, ordered[i][1].cycles,
                                       ordered[i][1].key))
    half = ordered[best_index][0] / 2
    half_of_best_index = min(range(len(ordered)),
                             key=lambda i: (abs(ordered[i][0] - half), ordered[i][0]))
    return CurveSeries(dimension=dimension, points=points, keys=keys,
                       best_index=best_index, optimum_index=optimum_index,
                       half_of_best_index=half_of_best_index)


def _key_cols(key):
    l1, l2, rf = key
    l1s = f"{l1[0]}:{l1[1]}" if isinstance(l1, tuple) else str(l1)
    return l1s, str(l2), str(rf)


def emit_csv(report, stream):
    """Write one row per grid point in grid order; returns bytes written."""
    n = 0

    def w(line):
        nonlocal n
        data = line + "\n"
        stream.write(data)
        n += len(data.encode("utf-8"))

    w(CSV_HEADER)
    for r in report.results:
        l1s, l2s, rfs = _key_cols(r.key)
        cs = r.cache_stats
        w(",".join([
            l1s, l2s, rfs, str(r.cycles), str(r.instructions),
            str(cs["L1I"].misses), str(cs["L1D"].misses), str(cs["L2"].misses),
            str(r.stall_rename), str(r.stall_rob), str(r.stall_mem),
            f"{r.penalty:.6f}", str(r.area.bits), f"{r.perf_per_area:.6e}",
        ]))
    return n


def _fmt_key(key):
    l1, l2, rf = key
    l1s = f"{l1[0]}:{l1[1]}" if isinstance(l1, tuple) else _fmt_size(l1)
    return f"L1={l1s} L2={_fmt_size(l2)} RF={rf}"


def _fmt_size(nbytes):
    if nbytes % 1024 == 0:
        return f"{nbytes // 1024}KB"
    return f"{nbytes}B"


def emit_summary(report, stream):
    """Human-readable selection summary (best, optimum, half-of-best)."""
    best = report.result_for(report.best)
    opt = report.result_for(report.optimum)
    saving = (1.0 - opt.area.bits / best.area.bits) * 100.0

    stream.write(f"protocol: {report.protocol}   epsilon: {report.epsilon:g}\n")
    trace = report.meta.get("trace")
    if trace:
        stream.write(f"trace: {trace} ({report.meta.get('trace_events', '?')} events)\n")
    stream.write(f"best    {_fmt_key(report.best)}  cycles={best.cycles}\n")
    stream.write(f"optimum {_fmt_key(report.optimum)}  cycles={opt.cycles}  "
                 f"penalty={opt.penalty * 100:.1f}%  area saving {saving:.1f}%\n")
    for curve in report.curves:
        size, _, pen, _, _ = curve.points[curve.half_of_best_index]
        best_size = curve.points[curve.best_index][0]
        label = _fmt_size(size) if curve.dimension != "rf" else str(size)
        best_label = _fmt_size(best_size) if curve.dimension != "rf" else str(best_size)
        stream.write(f"{curve.dimension}: best {best_label}, at half-of-best "
                     f"({label}) penalty {pen * 100:.1f}%\n")


def _curve_obj(curve):
    return {
        "dimension": curve.dimension,
        "points": [
            {"size": int(s), "cycles": int(c), "penalty": p,
             "area_bits": int(a), "perf_per_area": ppa}
            for s, c, p, a, ppa in curve.points
        ],
        "keys": [list(k) for k in curve.keys],
        "best_index": curve.best_index,
        "optimum_index": curve.optimum_index,
        "half_of_best_index": curve.half_of_best_index,
    }


def emit_curves_json(report, stream):
    """Stable-key JSON with all curves and raw results."""
    doc = {
        "protocol": report.protocol,
        "epsilon": report.epsilon,
        "best": list(report.best),
        "optimum": list(report.optimum),
        "phase_selections": {k: list(v) for k, v in report.phase_selections.items()},
        "meta": report.meta,
        "curves": [_curve_obj(c) for c in report.curves],
        "results": [r.as_dict() for r in report.results],
    }
    json.dump(doc, stream, indent=2)
    stream.write("\n")


def load_curves_json(stream):
    """Parse emit_curves_json output back into plain dicts (tuples for keys)."""
    doc = json.load(stream)

    def as_key(lst):
        return tuple(tuple(x) if isinstance(x, list) else x for x in lst)

    doc["best"] = as_key(doc["best"])
    doc["optimum"] = as_key(doc["optimum"])
    doc["phase_selections"] = {k: as_key(v) for k, v in doc["phase_selections"].items()}
    for c in doc["curves"]:
        c["keys"] = [as_key(k) for k in c["keys"]]
    for r in doc["results"]:
        r["key"] = as_key(r["key"])
    return doc
