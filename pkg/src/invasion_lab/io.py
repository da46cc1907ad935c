"""Artifacts on disk: configs, CSV tables, PGM snapshots and run manifests."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .errors import ConfigError


def load_config(path) -> dict:
    """Parse a JSON config, reporting the line and column of syntax errors."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(str(exc), field=str(path)) from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}", field=str(path)) from exc
    if not isinstance(cfg, dict):
        raise ConfigError("top level must be an object", field="<root>")
    return cfg


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable).encode()


def config_hash(cfg) -> str:
    """Git blob hash of the canonical JSON form of ``cfg``."""
    data = canonical_json(cfg)
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, Path):
        return str(x)
    return repr(x)


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def write_csv(path, columns: dict):
    """Columns of equal length under their names."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], float) for n in names])
    np.savetxt(path, data, delimiter=",", header=",".join(names), comments="", fmt="%.12g")


def read_csv(path):
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {n: data[:, k] for k, n in enumerate(names)}


def write_pgm(path, grid, vmin=0.0, vmax=1.0, meta=None):
    """8-bit binary PGM (row 0 at the top is the largest y) plus a JSON sidecar."""
    g = np.asarray(grid, float)
    if g.ndim == 1:
        g = g[None, :]
    scaled = np.clip((g - vmin) / (vmax - vmin), 0.0, 1.0)
    scaled = np.where(np.isfinite(scaled), scaled, 0.0)
    img = np.round(255 * scaled[::-1]).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        fh.write(img.tobytes())
    side = {"shape": list(g.shape), "vmin": vmin, "vmax": vmax}
    side.update(meta or {})
    write_json(str(path) + ".json", side)


def read_pgm(path):
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"P5":
            raise ValueError("not a binary PGM file")
        w, h = map(int, fh.readline().split())
        int(fh.readline())
        data = np.frombuffer(fh.read(w * h), dtype=np.uint8)
    return data.reshape(h, w)[::-1] / 255.0


def write_run(result, outdir, config=None, version="", seed=None, extra_paths=None) -> dict:
    """Write verdict.json, probes.csv, snapshots and manifest.json for a scenario result."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    traj = result.trajectory
    paths = {}
    summary = result.summary()
    write_json(out / "verdict.json", summary)
    paths["verdict"] = "verdict.json"
    cols = {"t": traj.times}
    cols.update({k: v for k, v in traj.probes.items()})
    write_csv(out / "probes.csv", cols)
    paths["probes"] = "probes.csv"
    snaps = list(traj.snapshots)
    if traj.final is not None and not snaps:
        snaps = [(traj.final.time, traj.final.values)]
    if snaps:
        (out / "snapshots").mkdir(exist_ok=True)
        mask = traj.mask
        for k, (t, u) in enumerate(snaps):
            name = f"snapshots/u_{k:04d}.pgm"
            write_pgm(out / name, mask.to_grid(u, fill=np.nan), meta={"time": float(t),
                      "window_bounds": [list(b) for b in mask.window_bounds]})
        paths["snapshots"] = f"snapshots/ ({len(snaps)} files)"
    paths.update(extra_paths or {})
    manifest = {"config_hash": config_hash(config) if config is not None else None,
                "version": version, "seed": seed, "wall_time": result.wall_time,
                "outputs": paths, "verdict": {"kind": result.verdict.kind, "label": result.verdict.label,
                                              "speed_right": result.verdict.speed_right,
                                              "matches": result.matches}}
    write_json(out / "manifest.json", manifest)
    return manifest


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return Path(path)
