"""Command-line surface: reproducible runs with cached, bit-exact outputs.

Commands: green-raster, periodic, entropy-report, manifold, homoclinic,
mu-sample.  Exit codes: 0 success (including honest empty results),
2 usage/config errors, 3 numeric saturation, 4 internal failures.
"""

from __future__ import annotations

import argparse
import sys
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .cache import cache_lookup, cache_restore, cache_store, make_envelope
from .config import RunConfig, build_slice, load_config
from .errors import (ConfigError, HenonLabError, NotRealMapError,
                     SaturationError)
from .green import raster_green, slice_measure_raster
from .manifolds import (find_intersections_detailed, green_on_chart, linearize)
from .measure import max_entropy_report
from .output import (INTERSECTION_HEADER, ORBIT_HEADER, RASTER_HEADER,
                     chart_dump_json, entropy_report_json, entropy_report_text,
                     intersection_rows, orbit_table_rows, raster_rows,
                     write_csv, write_json, write_pgm16, write_raster_meta)
from .periodic import (OrbitClass, completeness_audit,
                       find_periodic_orbits_detailed)


def _raster_banded(cfg: RunConfig, slc, window, resolution, tol, n_max, side):
    """Value raster, optionally split into row bands across a thread pool.

    Bands align on whole cell rows, so the stitched result is identical to
    a single-shot evaluation regardless of the thread count.
    """
    nx, ny = resolution
    if cfg.threads <= 1 or ny < 2 * cfg.threads:
        return raster_green(cfg.map, slc, window, resolution, tol=tol,
                            n_max=n_max, side=side)
    u0, u1, v0, v1 = window
    dv = (v1 - v0) / ny
    bounds = np.linspace(0, ny, cfg.threads + 1).astype(int)
    jobs = []
    for k in range(cfg.threads):
        r0, r1 = int(bounds[k]), int(bounds[k + 1])
        if r1 > r0:
            w = (u0, u1, v0 + r0 * dv, v0 + r1 * dv)
            jobs.append((w, (nx, r1 - r0)))
    with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
        parts = list(ex.map(
            lambda jw: raster_green(cfg.map, slc, jw[0], jw[1], tol=tol,
                                    n_max=n_max, side=side), jobs))
    grid0 = parts[0]
    values = np.vstack([p.values for p in parts])
    status = np.vstack([p.status for p in parts])
    err = np.vstack([p.err for p in parts])
    return type(grid0)(slice=slc, window=tuple(float(w) for w in window),
                       nx=nx, ny=ny, values=values, status=status, err=err,
                       tol=tol, n_max=n_max, side=side)


def cmd_green_raster(cfg: RunConfig):
    p = cfg.params
    slc = build_slice(p["slice"])
    grid = _raster_banded(cfg, slc, tuple(p["window"]), tuple(p["resolution"]),
                          p["tol"], p["n_max"], p["side"])
    vscale = write_pgm16(cfg.out_dir / "raster.pgm", grid, cfg.hash)
    write_raster_meta(cfg.out_dir / "raster_meta.json", grid, cfg.hash,
                      cfg.map_hash, vscale)
    write_csv(cfg.out_dir / "raster.csv", RASTER_HEADER, raster_rows(grid),
              cfg.hash)
    overflow_frac = float((grid.status == 2).mean())
    if overflow_frac > p["saturation_threshold"]:
        raise SaturationError(
            f"{overflow_frac:.1%} of cells saturated (threshold "
            f"{p['saturation_threshold']:.1%})")
    return ["raster.pgm", "raster_meta.json", "raster.csv"], []


def cmd_periodic(cfg: RunConfig):
    p = cfg.params
    res = find_periodic_orbits_detailed(
        cfg.map, p["n"], seed_density=p["seed_density"], tol=p["tol"],
        newton_max=p["newton_max"], dedup_eps=p["dedup_eps"],
        seed=cfg.seed, max_rounds=p["max_rounds"], eta=p["eta"],
        tol_im=p["tol_im"])
    audit = completeness_audit(cfg.map, p["n"], res.orbits)
    write_csv(cfg.out_dir / "orbit_table.csv", ORBIT_HEADER,
              orbit_table_rows(res.orbits), cfg.hash)
    write_json(cfg.out_dir / "audit.json", {
        "config_hash": cfg.hash,
        "map_hash": cfg.map_hash,
        "n": p["n"],
        "expected": audit.expected,
        "found_count": audit.found_count,
        "missing": audit.missing,
        "multiplicity_flags": [{"orbit_index": i, "sigma_min": s}
                               for i, s in audit.multiplicity_flags],
        "stats": vars(res.stats),
    })
    notes = []
    if audit.missing:
        notes.append(f"audit shortfall: {audit.missing} of {audit.expected} "
                     f"solutions not located")
    return ["orbit_table.csv", "audit.json"], notes


def cmd_entropy_report(cfg: RunConfig):
    p = cfg.params
    report = max_entropy_report(
        cfg.map, p["n_max"], homoclinic_scan=p["homoclinic_scan"],
        tol_im=p["tol_im"], tol=p["tol"], seed_density=p["seed_density"],
        max_rounds=p["max_rounds"], seed=cfg.seed)
    doc = entropy_report_json(report, cfg.hash, cfg.map_hash)
    doc["orbit_table"] = [dict(zip(ORBIT_HEADER, row))
                          for row in orbit_table_rows(report.orbits)]
    write_json(cfg.out_dir / "report.json", doc)
    (cfg.out_dir / "report.txt").write_bytes(
        entropy_report_text(report, cfg.hash).encode("ascii"))
    return ["report.json", "report.txt"], []


def _select_saddle(cfg: RunConfig, period: int, orbit_index):
    res = find_periodic_orbits_detailed(cfg.map, period, seed=cfg.seed)
    saddles = [o for o in res.orbits if o.orbit_class is OrbitClass.SADDLE]
    if not saddles:
        raise ConfigError(f"no saddle orbits with period dividing {period}")
    if orbit_index is not None:
        if not (0 <= orbit_index < len(saddles)):
            raise ConfigError(f"orbit_index {orbit_index} out of range "
                              f"(found {len(saddles)} saddles)")
        return saddles[orbit_index]
    pool = saddles
    if cfg.map.is_real:
        real = [o for o in saddles if o.realness == "real"]
        pool = real or saddles
    return max(pool, key=lambda o: abs(o.multipliers[1]) ** (1.0 / o.period))


def cmd_manifold(cfg: RunConfig):
    p = cfg.params
    saddle = _select_saddle(cfg, p["period"], p["orbit_index"])
    chart = linearize(cfg.map, saddle, p["side"], order=p["order"],
                      tol_chart=p["tol_chart"])
    write_json(cfg.out_dir / "chart.json",
               chart_dump_json(chart, cfg.hash, cfg.map_hash))
    grid = green_on_chart(cfg.map, chart, p["raster_extent"],
                          tuple(p["resolution"]), tol=p["raster_tol"])
    vscale = write_pgm16(cfg.out_dir / "chart_raster.pgm", grid, cfg.hash)
    write_raster_meta(cfg.out_dir / "chart_raster_meta.json", grid, cfg.hash,
                      cfg.map_hash, vscale)
    write_csv(cfg.out_dir / "chart_raster.csv", RASTER_HEADER,
              raster_rows(grid), cfg.hash)
    return ["chart.json", "chart_raster.pgm", "chart_raster_meta.json",
            "chart_raster.csv"], []


def cmd_homoclinic(cfg: RunConfig):
    p = cfg.params
    saddle = _select_saddle(cfg, p["period"], p["orbit_index"])
    cu = linearize(cfg.map, saddle, "unstable", order=p["order"])
    cs = linearize(cfg.map, saddle, "stable", order=p["order"])
    search = find_intersections_detailed(
        cfg.map, cu, cs, tol=p["tol"], span=p["span"], angles=p["angles"],
        bound_horizon=p["bound_horizon"])
    write_csv(cfg.out_dir / "intersections.csv", INTERSECTION_HEADER,
              intersection_rows(search.hits), cfg.hash)
    write_json(cfg.out_dir / "homoclinic_stats.json", {
        "config_hash": cfg.hash,
        "map_hash": cfg.map_hash,
        "hits": len(search.hits),
        "stats": vars(search.stats),
    })
    notes = []
    if not search.hits:
        notes.append(f"none found in window ({search.stats.seeds} seeds, "
                     f"{search.stats.converged} converged)")
    return ["intersections.csv", "homoclinic_stats.json"], notes


def cmd_mu_sample(cfg: RunConfig):
    p = cfg.params
    slc = build_slice(p["slice"])
    grid = slice_measure_raster(cfg.map, slc, tuple(p["window"]),
                                tuple(p["resolution"]), tol=p["tol"],
                                n_max=p["n_max"], side=p["side"])
    vscale = write_pgm16(cfg.out_dir / "mu_raster.pgm", grid, cfg.hash)
    write_raster_meta(cfg.out_dir / "mu_raster_meta.json", grid, cfg.hash,
                      cfg.map_hash, vscale)
    write_csv(cfg.out_dir / "mu_raster.csv", RASTER_HEADER, raster_rows(grid),
              cfg.hash)
    return ["mu_raster.pgm", "mu_raster_meta.json", "mu_raster.csv"], []


_RUNNERS = {
    "green-raster": cmd_green_raster,
    "periodic": cmd_periodic,
    "entropy-report": cmd_entropy_report,
    "manifold": cmd_manifold,
    "homoclinic": cmd_homoclinic,
    "mu-sample": cmd_mu_sample,
}


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="henonlab",
        description="dynamical invariants of composed Henon-type maps")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _RUNNERS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", default=None)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--precision", choices=("double", "extended"),
                        default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--no-cache", action="store_true")
    return ap


def run(cfg: RunConfig) -> int:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    if cfg.use_cache:
        env = cache_lookup(cfg.out_dir, cfg.hash)
        if env is not None:
            cache_restore(cfg.out_dir, env)
            write_json(cfg.out_dir / "envelope.json", env.to_dict())
            print(f"cache hit {cfg.hash}")
            return 0
    payloads, notes = _RUNNERS[cfg.command](cfg)
    env = make_envelope(cfg.hash, __version__, cfg.command, started,
                        cfg.out_dir, payloads, notes)
    write_json(cfg.out_dir / "envelope.json", env.to_dict())
    if cfg.use_cache:
        cache_store(cfg.out_dir, env)
    for note in notes:
        print(f"note: {note}")
    print(f"done {cfg.command} config {cfg.hash} "
          f"({env.wall_clock_s:.2f}s, {len(payloads)} payloads)")
    return 0


def main(argv=None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config, args.command, out_override=args.out,
                          seed_override=args.seed,
                          precision_override=args.precision,
                          threads=args.threads,
                          use_cache=not args.no_cache)
        return run(cfg)
    except (ConfigError, NotRealMapError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SaturationError as exc:
        print(f"saturation: {exc}", file=sys.stderr)
        return 3
    except HenonLabError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        traceback.print_exc()
        return 4
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        traceback.print_exc()
        return 4


if __name__ == "__main__":
    sys.exit(main())
