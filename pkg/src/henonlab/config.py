"""Run configuration: parsing, validation, canonical hashing.

A run is described by one JSON document with a map spec, per-command
parameter sections, a deterministic seed and an output directory.  The
canonical serialization (sorted keys, no whitespace; floats in shortest
round-trip form) feeds the config hash embedded in every output file.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .mapcore import ComposedMap, from_classical_henon, make_map

COMMANDS = ("green-raster", "periodic", "entropy-report", "manifold",
            "homoclinic", "mu-sample")

_SECTION = {c: c.replace("-", "_") for c in COMMANDS}

DEFAULTS = {
    "green_raster": {
        "slice": {"kind": "real_plane"},
        "window": [-2.0, 2.0, -2.0, 2.0],
        "resolution": [128, 128],
        "tol": 1e-8,
        "n_max": 200,
        "side": "forward",
        "saturation_threshold": 0.5,
    },
    "periodic": {
        "n": 1,
        "tol": 1e-10,
        "seed_density": 24,
        "newton_max": 80,
        "dedup_eps": 1e-8,
        "max_rounds": 3,
        "eta": 1e-3,
        "tol_im": 1e-8,
    },
    "entropy_report": {
        "n_max": 3,
        "homoclinic_scan": False,
        "tol": 1e-10,
        "seed_density": 24,
        "max_rounds": 3,
        "tol_im": 1e-8,
    },
    "manifold": {
        "period": 1,
        "orbit_index": None,
        "side": "unstable",
        "order": 30,
        "tol_chart": 1e-10,
        "raster_extent": 1.0,
        "resolution": [64, 64],
        "raster_tol": 1e-8,
    },
    "homoclinic": {
        "period": 1,
        "orbit_index": None,
        "order": 30,
        "span": 6.0,
        "angles": 8,
        "tol": 1e-10,
        "bound_horizon": 12,
    },
    "mu_sample": {
        "slice": None,  # required: complex_line or affine
        "window": [-2.0, 2.0, -2.0, 2.0],
        "resolution": [128, 128],
        "tol": 1e-8,
        "n_max": 200,
        "side": "forward",
    },
}


def _num(v, what: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise ConfigError(f"{what} must be a number, got {v!r}")
    try:
        return float(v)
    except ValueError as exc:
        raise ConfigError(f"{what} is not a number: {v!r}") from exc


def _pair(v, what: str) -> complex:
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ConfigError(f"{what} must be an [re, im] pair")
    return complex(_num(v[0], what), _num(v[1], what))


def build_map(spec) -> ComposedMap:
    """Build a ComposedMap from the map section of a config."""
    if not isinstance(spec, dict):
        raise ConfigError("map spec must be an object")
    if "classical" in spec:
        c = spec["classical"]
        if not isinstance(c, dict) or "a" not in c or "b" not in c:
            raise ConfigError("classical map spec needs fields a and b")
        a = _num(c["a"], "classical.a")
        b = _num(c["b"], "classical.b")
        if b == 0:
            raise ConfigError("classical.b must be nonzero")
        return from_classical_henon(a, b).map
    if "factors" in spec:
        facs = spec["factors"]
        if not isinstance(facs, list) or not facs:
            raise ConfigError("factors must be a nonempty list")
        out = []
        for i, f in enumerate(facs):
            if not isinstance(f, dict) or "p_coeffs" not in f or "delta" not in f:
                raise ConfigError(f"factor {i} needs p_coeffs and delta")
            coeffs = [_pair(c, f"factor {i} coefficient") for c in f["p_coeffs"]]
            if len(coeffs) < 3:
                raise ConfigError(f"factor {i}: polynomial degree must be >= 2")
            out.append((coeffs, _pair(f["delta"], f"factor {i} delta")))
        try:
            return make_map(out)
        except Exception as exc:
            raise ConfigError(f"invalid factor list: {exc}") from exc
    raise ConfigError("map spec needs either 'classical' or 'factors'")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode("ascii")).hexdigest()[:16]


def map_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg.get("map", {})).encode("ascii")).hexdigest()[:16]


@dataclass
class RunConfig:
    """Validated run configuration for one CLI command."""

    command: str
    raw: dict
    map: ComposedMap = field(repr=False)
    params: dict
    seed: int
    out_dir: Path
    precision: str
    threads: int
    use_cache: bool = True

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    @property
    def map_hash(self) -> str:
        return map_hash(self.raw)


def load_config(path, command: str, *, out_override=None, seed_override=None,
                precision_override=None, threads: int = 1,
                use_cache: bool = True) -> RunConfig:
    """Read, merge overrides, validate; raises ConfigError on any defect."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    if "map" not in raw:
        raise ConfigError("config needs a 'map' section")
    if out_override is not None:
        raw["out"] = str(out_override)
    if seed_override is not None:
        raw["seed"] = int(seed_override)
    if precision_override is not None:
        raw["precision"] = precision_override

    section = _SECTION[command]
    params = dict(DEFAULTS[section])
    user = raw.get(section, {})
    if not isinstance(user, dict):
        raise ConfigError(f"section {section!r} must be an object")
    unknown = set(user) - set(params)
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
    params.update(user)
    _validate_params(section, params)

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    precision = raw.get("precision", "double")
    if precision not in ("double", "extended"):
        raise ConfigError("precision must be 'double' or 'extended'")
    m = build_map(raw["map"])
    out_dir = Path(raw.get("out", "out"))
    return RunConfig(command=command, raw=raw, map=m, params=params,
                     seed=seed, out_dir=out_dir, precision=precision,
                     threads=max(1, int(threads)), use_cache=use_cache)


def _validate_params(section: str, p: dict):
    for key in ("tol", "dedup_eps", "tol_chart", "raster_tol", "tol_im", "eta"):
        if key in p and not _num(p[key], key) > 0:
            raise ConfigError(f"{section}.{key} must be > 0")
    if "resolution" in p:
        r = p["resolution"]
        if not (isinstance(r, list) and len(r) == 2
                and all(isinstance(v, int) and v >= 2 for v in r)):
            raise ConfigError(f"{section}.resolution must be two integers >= 2")
    if "window" in p:
        w = p["window"]
        if not (isinstance(w, list) and len(w) == 4):
            raise ConfigError(f"{section}.window must be [u0, u1, v0, v1]")
        if not (_num(w[0], "u0") < _num(w[1], "u1")
                and _num(w[2], "v0") < _num(w[3], "v1")):
            raise ConfigError(f"{section}.window must be increasing per axis")
    for key in ("n", "n_max", "seed_density", "newton_max", "max_rounds",
                "order", "period", "angles", "bound_horizon"):
        if key in p and p[key] is not None:
            if not isinstance(p[key], int) or p[key] < 1:
                raise ConfigError(f"{section}.{key} must be a positive integer")
    if "side" in p and p["side"] not in ("forward", "backward",
                                         "unstable", "stable"):
        raise ConfigError(f"{section}.side is invalid")


def build_slice(spec):
    """Slice spec -> AffineSlice; kinds: real_plane, complex_line, affine."""
    from .green import AffineSlice
    from .mapcore import Point2

    if spec is None:
        raise ConfigError("a slice spec is required")
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("slice spec must be an object with a 'kind'")
    kind = spec["kind"]
    if kind == "real_plane":
        return AffineSlice.real_plane()
    if kind == "complex_line":
        base = spec.get("base", [[0, 0], [0, 0]])
        direction = spec.get("direction")
        if direction is None:
            raise ConfigError("complex_line slice needs a direction")
        b = Point2(_pair(base[0], "base.x"), _pair(base[1], "base.y"))
        d = (_pair(direction[0], "direction.x"), _pair(direction[1], "direction.y"))
        return AffineSlice.complex_line(b, d)
    if kind == "affine":
        try:
            b = Point2(_pair(spec["base"][0], "base.x"), _pair(spec["base"][1], "base.y"))
            d1 = (_pair(spec["dir1"][0], "dir1.x"), _pair(spec["dir1"][1], "dir1.y"))
            d2 = (_pair(spec["dir2"][0], "dir2.x"), _pair(spec["dir2"][1], "dir2.y"))
        except (KeyError, IndexError, TypeError) as exc:
            raise ConfigError("affine slice needs base, dir1, dir2") from exc
        return AffineSlice(b, d1, d2)
    raise ConfigError(f"unknown slice kind {kind!r}")
