"""Result cache keyed by config hash.

An envelope records the command, toolkit version, wall clock and the
sha256 of each payload file.  A hit restores payload bytes verbatim; any
inconsistency (missing file, digest mismatch, unreadable envelope) is
treated as a miss with a warning and the result is recomputed.
"""

from __future__ import annotations

import hashlib
import json
import shutil
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class ResultEnvelope:
    config_hash: str
    version: str
    command: str
    wall_clock_s: float
    payloads: list = field(default_factory=list)  # [{"name":..., "sha256":...}]
    provenance: list = field(default_factory=list)
    cache_hit: bool = False

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "version": self.version,
            "command": self.command,
            "wall_clock_s": self.wall_clock_s,
            "payloads": self.payloads,
            "provenance": self.provenance,
            "cache_hit": self.cache_hit,
        }


def make_envelope(cfg_hash: str, version: str, command: str, started: float,
                  out_dir: Path, payload_names, notes=()) -> ResultEnvelope:
    payloads = [{"name": name, "sha256": _sha256(Path(out_dir) / name)}
                for name in payload_names]
    return ResultEnvelope(config_hash=cfg_hash, version=version,
                          command=command,
                          wall_clock_s=time.monotonic() - started,
                          payloads=payloads, provenance=list(notes))


def cache_dir(out_dir: Path, cfg_hash: str) -> Path:
    return Path(out_dir) / ".cache" / cfg_hash


def cache_lookup(out_dir: Path, cfg_hash: str):
    """Return the cached envelope if every payload verifies, else None."""
    cdir = cache_dir(out_dir, cfg_hash)
    env_path = cdir / "envelope.json"
    if not env_path.exists():
        return None
    try:
        data = json.loads(env_path.read_text())
        payloads = data["payloads"]
        for p in payloads:
            f = cdir / p["name"]
            if not f.exists() or _sha256(f) != p["sha256"]:
                raise ValueError(f"payload {p['name']} failed verification")
    except Exception as exc:
        print(f"warning: corrupted cache entry {cfg_hash}: {exc}; recomputing",
              file=sys.stderr)
        return None
    env = ResultEnvelope(config_hash=data["config_hash"], version=data["version"],
                         command=data["command"],
                         wall_clock_s=data["wall_clock_s"],
                         payloads=payloads,
                         provenance=data.get("provenance", []),
                         cache_hit=True)
    return env


def cache_restore(out_dir: Path, env: ResultEnvelope):
    cdir = cache_dir(out_dir, env.config_hash)
    for p in env.payloads:
        shutil.copyfile(cdir / p["name"], Path(out_dir) / p["name"])


def cache_store(out_dir: Path, env: ResultEnvelope):
    cdir = cache_dir(out_dir, env.config_hash)
    cdir.mkdir(parents=True, exist_ok=True)
    for p in env.payloads:
        shutil.copyfile(Path(out_dir) / p["name"], cdir / p["name"])
    (cdir / "envelope.json").write_text(
        json.dumps(env.to_dict(), indent=2, sort_keys=True) + "\n")
