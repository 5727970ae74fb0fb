"""Bit-exact output writers: CSV tables, 16-bit P5 rasters, reports.

Floats are rendered with repr (shortest round-trip), lines end with LF,
and every file embeds the config hash, so identical configs reproduce
identical bytes.
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path

import numpy as np


def fmt(v) -> str:
    if isinstance(v, float):
        v = float(v)  # strip numpy scalar wrappers so repr is canonical
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def write_csv(path: Path, header, rows, cfg_hash: str):
    lines = [f"# config {cfg_hash}", ",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("ascii"))


def orbit_table_rows(orbits):
    rows = []
    for oi, o in enumerate(orbits):
        ls, lu = o.multipliers if o.multipliers else (complex("nan"), complex("nan"))
        for pi, p in enumerate(o.points):
            rows.append((
                o.period, oi, pi,
                p.x.real, p.x.imag, p.y.real, p.y.imag,
                o.residual,
                ls.real, ls.imag, lu.real, lu.imag,
                o.orbit_class.value if o.orbit_class else "",
                o.realness or "",
                o.max_im,
            ))
    return rows


ORBIT_HEADER = ("period", "index", "point_index", "re_x", "im_x", "re_y",
                "im_y", "residual", "re_lambda_s", "im_lambda_s",
                "re_lambda_u", "im_lambda_u", "class", "realness", "max_im")


INTERSECTION_HEADER = ("re_s", "im_s", "re_t", "im_t", "re_x", "im_x",
                       "re_y", "im_y", "residual", "transversal",
                       "sigma_min", "max_im")


def intersection_rows(hits):
    return [(h.s.real, h.s.imag, h.t.real, h.t.imag,
             h.point.x.real, h.point.x.imag, h.point.y.real, h.point.y.imag,
             h.residual, int(h.transversal), h.sigma_min, h.max_im)
            for h in hits]


RASTER_HEADER = ("row", "col", "re_param", "im_param", "value", "mass", "status")


def raster_rows(grid):
    u0, u1, v0, v1 = grid.window
    du = (u1 - u0) / grid.nx
    dv = (v1 - v0) / grid.ny
    rows = []
    for i in range(grid.ny):
        for j in range(grid.nx):
            mass = grid.mass[i, j] if grid.mass is not None else ""
            rows.append((i, j, u0 + (j + 0.5) * du, v0 + (i + 0.5) * dv,
                         float(grid.values[i, j]), mass, int(grid.status[i, j])))
    return rows


def write_pgm16(path: Path, grid, cfg_hash: str):
    """16-bit P5 graymap of the value raster.

    Bounded cells map to 0; escaped cells scale linearly on [1, 65535]
    over [0, vmax]; the sidecar records the scale.  Returns (vmin, vmax).
    """
    vals = np.asarray(grid.values, dtype=float)
    escaped = np.asarray(grid.status) != 0
    vmax = float(vals[escaped].max()) if escaped.any() else 1.0
    if vmax <= 0:
        vmax = 1.0
    gray = np.zeros(vals.shape, dtype=np.uint16)
    scaled = 1 + np.round(np.clip(vals / vmax, 0.0, 1.0) * 65534).astype(np.uint16)
    gray[escaped] = scaled[escaped]
    header = f"P5\n# config {cfg_hash}\n{grid.nx} {grid.ny}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + gray.astype(">u2").tobytes())
    return 0.0, vmax


def write_raster_meta(path: Path, grid, cfg_hash: str, mhash: str, vscale):
    meta = {
        "config_hash": cfg_hash,
        "map_hash": mhash,
        "window": list(grid.window),
        "resolution": [grid.nx, grid.ny],
        "tol": grid.tol,
        "n_max": grid.n_max,
        "side": grid.side,
        "value_scale": {"vmin": vscale[0], "vmax": vscale[1],
                        "gray": "0 bounded; 1..65535 linear in value"},
        "status_codes": {"0": "bounded-up-to-n-max", "1": "escaped",
                         "2": "escaped-overflow-cutoff"},
    }
    write_json(path, meta)


def write_json(path: Path, obj):
    Path(path).write_bytes(
        (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("ascii"))


def _orbit_json(o):
    if o is None:
        return None
    ls, lu = o.multipliers if o.multipliers else (complex("nan"), complex("nan"))
    return {
        "period": o.period,
        "requested_n": o.requested_n,
        "residual": o.residual,
        "points": [[p.x.real, p.x.imag, p.y.real, p.y.imag] for p in o.points],
        "multipliers": {"lambda_s": [ls.real, ls.imag],
                        "lambda_u": [lu.real, lu.imag]},
        "class": o.orbit_class.value if o.orbit_class else None,
        "realness": o.realness,
        "max_im": o.max_im,
    }


def entropy_report_json(report, cfg_hash: str, mhash: str) -> dict:
    return {
        "config_hash": cfg_hash,
        "map_hash": mhash,
        "degree": report.map.degree,
        "log_degree": math.log(report.map.degree),
        "n_max": report.n_max,
        "verdict": report.verdict.value,
        "reason": report.reason,
        "all_periodic_real": report.all_periodic_real,
        "growth_table": [{"n": r.n, "complex_count": r.complex_count,
                          "real_count": r.real_count} for r in report.growth_table],
        "nonreal_witness": _orbit_json(report.nonreal_witness),
        "sinks_found": [_orbit_json(o) for o in report.sinks_found],
        "homoclinic_real": report.homoclinic_real,
        "note": ("a consistent verdict is a finite check up to the period "
                 "horizon, not a proof of entropy maximality"),
    }


def entropy_report_text(report, cfg_hash: str) -> str:
    lines = []
    lines.append("maximal-entropy report")
    lines.append(f"config {cfg_hash}")
    lines.append(f"degree d = {report.map.degree}, "
                 f"log d = {fmt(math.log(report.map.degree))}")
    lines.append(f"period horizon N_max = {report.n_max}")
    lines.append("growth table (n, complex solution count, real count):")
    for r in report.growth_table:
        lines.append(f"  {r.n} {r.complex_count} {r.real_count}")
    lines.append(f"verdict: {report.verdict.value}")
    lines.append(f"reason: {report.reason}")
    if report.nonreal_witness is not None:
        w = report.nonreal_witness
        lines.append(f"nonreal witness: period {w.period}, residual {fmt(w.residual)}, "
                     f"max |Im| {fmt(w.max_im)}")
        for p in w.points:
            lines.append(f"  point re_x={fmt(p.x.real)} im_x={fmt(p.x.imag)} "
                         f"re_y={fmt(p.y.real)} im_y={fmt(p.y.imag)}")
    if report.sinks_found:
        lines.append(f"sinks found: {len(report.sinks_found)} "
                     f"(first period {report.sinks_found[0].period})")
    else:
        lines.append("sinks found: none")
    if report.homoclinic_real is None:
        lines.append("homoclinic realness scan: not run / no hits")
    elif report.homoclinic_real:
        lines.append("homoclinic realness scan: all intersections in the "
                     "window are real (unknown beyond window)")
    else:
        lines.append("homoclinic realness scan: nonreal intersection found")
    lines.append("note: a consistent verdict is a finite check up to the "
                 "period horizon, not a proof of entropy maximality")
    return "\n".join(lines) + "\n"


def chart_dump_json(chart, cfg_hash: str, mhash: str) -> dict:
    return {
        "config_hash": cfg_hash,
        "map_hash": mhash,
        "side": chart.side,
        "residual_sup": chart.tol_chart,
        "base_point": [chart.base.x.real, chart.base.x.imag,
                       chart.base.y.real, chart.base.y.imag],
        "lambda": [chart.lam.real, chart.lam.imag],
        "order": chart.order,
        "r0": chart.r0,
        "period": chart.orbit.period,
        "coefficients": [[c[0].real, c[0].imag, c[1].real, c[1].imag]
                         for c in chart.coeffs],
    }
