"""Artifact serialization: field CSV, 8-bit PGM snapshots, JSON reports, manifests.

CSV fields are comma separated with '.' decimals in row-major grid order
(row i holds y = -L + (i+0.5)h, column j holds x = -L + (j+0.5)h); obstacle
cells are written as nan.  Numbers use %.17g so identical runs produce byte
identical files.  PGM snapshots are binary P5 with the linear [0,1] to
[0,255] mapping, rows top-down (largest y first), obstacle cells black.
"""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

import numpy as np

from .operator import Field, Grid2D

TOOLKIT_VERSION = "0.1.0"


class OutputError(RuntimeError):
    pass


def write_field_csv(path, fld: Field, time_label: float | None = None):
    grid = fld.grid
    vals = np.where(grid.mask, fld.values, np.nan)
    header = (f"# fracfront field: halfwidth={grid.halfwidth:.17g} cells={grid.n_cells} "
              f"h={grid.h:.17g} farfield={fld.farfield:.17g}"
              + (f" time={time_label:.17g}" if time_label is not None else "")
              + "; row i: y=-L+(i+0.5)h, col j: x=-L+(j+0.5)h; obstacle cells = nan")
    lines = [header]
    for row in vals:
        lines.append(",".join(f"{v:.17g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_field_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", comments="#", ndmin=2)


def field_from_csv(path, grid: Grid2D, farfield: float) -> Field:
    vals = read_field_csv(path)
    if vals.shape != grid.mask.shape:
        raise OutputError(f"{path}: field shape {vals.shape} does not match the grid")
    return Field(grid, np.nan_to_num(vals, nan=0.0), farfield)


def write_pgm(path, fld: Field):
    grid = fld.grid
    scaled = np.clip(fld.values, 0.0, 1.0) * 255.0
    img = np.where(grid.mask, np.rint(scaled), 0.0).astype(np.uint8)
    img = np.flipud(img)  # image rows top-down
    n = grid.n_cells
    with open(path, "wb") as fh:
        fh.write(f"P5\n{n} {n}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    """Minimal P5/P2 reader (maxval <= 255), returning a uint8 array rows top-down."""
    data = Path(path).read_bytes()
    tokens = []
    i = 0
    while len(tokens) < 4:
        if i >= len(data):
            raise OutputError(f"{path}: truncated PGM header")
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i:i + 1] != b"\n":
                i += 1
        elif data[i:i + 1].isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j:j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise OutputError(f"{path}: only 8-bit PGM supported (maxval={maxval})")
    if magic == b"P5":
        raw = data[i + 1:i + 1 + w * h]
        if len(raw) < w * h:
            raise OutputError(f"{path}: truncated PGM payload")
        return np.frombuffer(raw, dtype=np.uint8).reshape(h, w)
    if magic == b"P2":
        vals = np.array([int(t) for t in data[i:].split()], dtype=np.uint8)
        if vals.size < w * h:
            raise OutputError(f"{path}: truncated PGM payload")
        return vals[:w * h].reshape(h, w)
    raise OutputError(f"{path}: unsupported PGM magic {magic!r}")


def write_profile_csv(path, profile):
    lines = ["z,phi"]
    for z, p in zip(profile.z, profile.phi):
        lines.append(f"{z:.17g},{p:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else repr(f)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def write_json(path, payload: dict):
    Path(path).write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


class RunManifest:
    """Inventory of every emitted file with checksums, written before exit.

    Use as a context manager; on error paths the manifest still lands with
    the partial inventory and the failure message.
    """

    def __init__(self, out_dir, command: str, config_echo: dict | None = None):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.config_echo = config_echo or {}
        self.timings: dict[str, float] = {}
        self.files: list[dict] = []
        self.status = "ok"
        self.error: str | None = None
        self._t0 = time.time()

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def record(self, path) -> Path:
        path = Path(path)
        payload = path.read_bytes()
        self.files.append({
            "path": path.name,
            "bytes": len(payload),
            "sha256": hashlib.sha256(payload).hexdigest(),
        })
        return path

    def add_timing(self, phase: str, seconds: float):
        self.timings[phase] = float(seconds)

    def fail(self, message: str):
        self.status = "error"
        self.error = message

    def write(self) -> Path:
        payload = {
            "command": self.command,
            "toolkit_version": TOOLKIT_VERSION,
            "config": self.config_echo,
            "timings": {**self.timings, "total": time.time() - self._t0},
            "outputs": self.files,
            "status": self.status,
        }
        if self.error is not None:
            payload["error"] = self.error
        target = self.out_dir / "manifest.json"
        write_json(target, payload)
        return target

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and self.status == "ok":
            self.fail(f"{exc_type.__name__}: {exc}")
        self.write()
        return False
