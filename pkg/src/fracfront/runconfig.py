"""Flat sectioned key-value run configuration.

Format: ``[section]`` headers, ``key = value`` lines, ``#`` comments.
Sections: grid, obstacle, kernel, reaction, time, initial, output.  Unknown
sections or keys are hard errors with the offending line number; silently
defaulted typos are the main reproducibility hazard this format avoids.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import geometry
from .evolution import InitialSpec, SimConfig
from .kernels import KernelFamily, make_kernel, table_kernel_from_csv
from .reaction import cubic_bistable, tabulated_from_csv


class ConfigError(ValueError):
    """Parse or validation failure, anchored to a config line when possible."""


@dataclass
class _Entry:
    value: str
    line: int


def _parse_sections(text: str, source: str) -> dict[str, dict[str, _Entry]]:
    sections: dict[str, dict[str, _Entry]] = {}
    current = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current in sections:
                raise ConfigError(f"{source}:{ln}: duplicate section [{current}]")
            sections[current] = {}
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{ln}: expected 'key = value', got {raw.strip()!r}")
        if current is None:
            raise ConfigError(f"{source}:{ln}: key outside any [section]")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.lower() in sections[current]:
            raise ConfigError(f"{source}:{ln}: duplicate key {key!r} in [{current}]")
        sections[current][key.lower()] = _Entry(value, ln)
    return sections


def _floats(entry: _Entry, source, n=None):
    try:
        vals = [float(v) for v in entry.value.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{source}:{entry.line}: not a number list: {entry.value!r}")
    if n is not None and len(vals) != n:
        raise ConfigError(f"{source}:{entry.line}: expected {n} numbers, got {len(vals)}")
    return vals


def _float(entry: _Entry, source):
    return _floats(entry, source, 1)[0]


def _int(entry: _Entry, source):
    v = _float(entry, source)
    if v != int(v):
        raise ConfigError(f"{source}:{entry.line}: expected an integer, got {entry.value!r}")
    return int(v)


class _Section:
    def __init__(self, name, entries, source, known):
        self.name = name
        self.entries = entries
        self.source = source
        for key in entries:
            if key not in known:
                raise ConfigError(
                    f"{source}:{entries[key].line}: unknown key {key!r} in [{name}] "
                    f"(known: {', '.join(sorted(known))})")

    def get(self, key, default=None):
        return self.entries.get(key, default)

    def require(self, key):
        if key not in self.entries:
            raise ConfigError(f"{self.source}: [{self.name}] is missing required key {key!r}")
        return self.entries[key]


_KNOWN = {
    "grid": {"halfwidth", "cells"},
    "obstacle": {"shape", "center", "radius", "semi_axes", "vertices", "pgm", "halfwidth"},
    "kernel": {"family", "s", "delta", "c_norm", "table"},
    "reaction": {"kind", "theta", "table"},
    "time": {"t_end", "dt", "snapshots", "steady_tol"},
    "initial": {"kind", "direction", "offset", "value", "csv", "farfield"},
    "output": {"prefix", "figures"},
}


@dataclass
class OutputOptions:
    prefix: str = "run"
    figures: bool = True


def load_config(path) -> tuple[SimConfig, OutputOptions]:
    """Parse and validate a run configuration file into a SimConfig."""
    source = str(path)
    text = Path(path).read_text()
    raw = _parse_sections(text, source)
    for name in raw:
        if name not in _KNOWN:
            raise ConfigError(f"{source}: unknown section [{name}] "
                              f"(known: {', '.join(sorted(_KNOWN))})")
    sections = {name: _Section(name, raw.get(name, {}), source, keys)
                for name, keys in _KNOWN.items()}

    g = sections["grid"]
    halfwidth = _float(g.require("halfwidth"), source)
    cells = _int(g.require("cells"), source)
    if halfwidth <= 0:
        raise ConfigError(f"{source}: grid halfwidth must be positive")
    if cells < 4:
        raise ConfigError(f"{source}: grid cells must be at least 4")

    obstacle = _parse_obstacle(sections["obstacle"], source)
    kernel = _parse_kernel(sections["kernel"], source)
    reaction = _parse_reaction(sections["reaction"], source)

    t = sections["time"]
    t_end = _float(t.require("t_end"), source)
    dt_entry = t.get("dt")
    if dt_entry is None or dt_entry.value.strip().lower() == "auto":
        dt = None
    else:
        dt = _float(dt_entry, source)
        if dt <= 0:
            raise ConfigError(f"{source}:{dt_entry.line}: dt must be positive or 'auto'")
    snaps_entry = t.get("snapshots")
    snapshots = tuple(_floats(snaps_entry, source)) if snaps_entry else ()
    steady_entry = t.get("steady_tol")
    steady_tol = _float(steady_entry, source) if steady_entry else 1e-6

    init = _parse_initial(sections["initial"], source)
    ff_entry = sections["initial"].get("farfield")
    farfield = _float(ff_entry, source) if ff_entry else 0.0

    out = sections["output"]
    prefix_entry = out.get("prefix")
    figures_entry = out.get("figures")
    figures = True
    if figures_entry is not None:
        word = figures_entry.value.strip().lower()
        if word not in ("true", "false"):
            raise ConfigError(f"{source}:{figures_entry.line}: figures must be true or false")
        figures = word == "true"
    options = OutputOptions(prefix_entry.value if prefix_entry else "run", figures)

    try:
        config = SimConfig(halfwidth, cells, obstacle, kernel, reaction,
                           t_end, snapshots, dt, steady_tol, init, farfield)
    except Exception as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return config, options


def _parse_obstacle(sec: _Section, source):
    shape_entry = sec.require("shape")
    shape = shape_entry.value.strip().lower()
    if shape == "none":
        return geometry.Disk((0.0, 0.0), 0.0)
    if shape == "disk":
        cx, cy = _floats(sec.require("center"), source, 2)
        radius = _float(sec.require("radius"), source)
        return geometry.Disk((cx, cy), radius)
    if shape == "ellipse":
        cx, cy = _floats(sec.require("center"), source, 2)
        a, b = _floats(sec.require("semi_axes"), source, 2)
        return geometry.Ellipse((cx, cy), (a, b))
    if shape == "polygon":
        vals = _floats(sec.require("vertices"), source)
        if len(vals) % 2 != 0 or len(vals) < 6:
            raise ConfigError(f"{source}: polygon vertices need an even number (>= 6) of coordinates")
        verts = np.array(vals).reshape(-1, 2)
        return geometry.ConvexPolygon(verts)
    if shape == "raster":
        pgm = sec.require("pgm").value
        hw = _float(sec.require("halfwidth"), source)
        return geometry.raster_from_pgm(pgm, hw)
    raise ConfigError(f"{source}:{shape_entry.line}: unknown obstacle shape {shape!r} "
                      "(disk, ellipse, polygon, raster, none)")


def _parse_kernel(sec: _Section, source):
    fam_entry = sec.require("family")
    fam = fam_entry.value.strip().lower()
    c_entry = sec.get("c_norm")
    c_norm = _float(c_entry, source) if c_entry else 1.0
    if fam == "table":
        table = sec.require("table").value
        return table_kernel_from_csv(table, dim=2, c_norm=c_norm)
    s_entry = sec.require("s")
    s = _float(s_entry, source)
    d_entry = sec.get("delta")
    delta = _float(d_entry, source) if d_entry else 0.0
    try:
        if fam == "regularized":
            return make_kernel(KernelFamily.REGULARIZED_FRACTIONAL, s, 2, delta, c_norm)
        if fam == "singular":
            return make_kernel(KernelFamily.SINGULAR_FRACTIONAL, s, 2, delta, c_norm)
    except Exception as exc:
        raise ConfigError(f"{source}:{s_entry.line}: invalid kernel: {exc}") from exc
    raise ConfigError(f"{source}:{fam_entry.line}: unknown kernel family {fam!r} "
                      "(regularized, singular, table)")


def _parse_reaction(sec: _Section, source):
    kind_entry = sec.require("kind")
    kind = kind_entry.value.strip().lower()
    if kind == "cubic":
        th_entry = sec.require("theta")
        theta = _float(th_entry, source)
        try:
            return cubic_bistable(theta)
        except Exception as exc:
            raise ConfigError(f"{source}:{th_entry.line}: {exc}") from exc
    if kind == "tabulated":
        return tabulated_from_csv(sec.require("table").value)
    raise ConfigError(f"{source}:{kind_entry.line}: unknown reaction kind {kind!r} "
                      "(cubic, tabulated)")


def _parse_initial(sec: _Section, source):
    kind_entry = sec.require("kind")
    kind = kind_entry.value.strip().lower()
    if kind == "heaviside":
        d_entry = sec.get("direction")
        direction = tuple(_floats(d_entry, source, 2)) if d_entry else (1.0, 0.0)
        o_entry = sec.get("offset")
        offset = _float(o_entry, source) if o_entry else 0.0
        return InitialSpec("heaviside", direction=direction, offset=offset)
    if kind == "constant":
        value = _float(sec.require("value"), source)
        if not 0.0 <= value <= 1.0:
            raise ConfigError(f"{source}: constant initial value must lie in [0, 1]")
        return InitialSpec("constant", value=value)
    if kind == "custom":
        return InitialSpec("custom", path=sec.require("csv").value)
    raise ConfigError(f"{source}:{kind_entry.line}: unknown initial kind {kind!r} "
                      "(heaviside, constant, custom)")


def config_echo(config: SimConfig, options: OutputOptions | None = None) -> dict:
    """Fully resolved parameters, defaults included, for reports and manifests."""
    obs = config.obstacle
    obs_echo: dict = {"type": type(obs).__name__, "convex": bool(obs.declared_convex)}
    if isinstance(obs, geometry.Disk):
        obs_echo.update(center=list(obs.center), radius=obs.radius)
    elif isinstance(obs, geometry.Ellipse):
        obs_echo.update(center=list(obs.center), semi_axes=list(obs.semi_axes))
    elif isinstance(obs, geometry.ConvexPolygon):
        obs_echo.update(vertices=obs.vertices.tolist())
    elif isinstance(obs, geometry.RasterMask):
        obs_echo.update(cells=int(obs.mask.sum()), halfwidth=obs.halfwidth)
    k = config.kernel
    echo = {
        "grid": {"halfwidth": config.grid_halfwidth, "cells": config.grid_cells},
        "obstacle": obs_echo,
        "kernel": {"family": k.family.value, "s": k.s, "delta": k.delta,
                   "c_norm": k.c_norm, "dim": k.dim},
        "reaction": {"kind": config.reaction.kind, "theta": config.reaction.theta,
                     "lip_bound": config.reaction.lip_bound},
        "time": {"t_end": config.t_end, "dt": config.dt if config.dt is not None else "auto",
                 "snapshots": list(config.snapshot_times), "steady_tol": config.steady_tol},
        "initial": {"kind": config.initial.kind, "direction": list(config.initial.direction),
                    "offset": config.initial.offset, "value": config.initial.value,
                    "farfield": config.farfield},
    }
    if options is not None:
        echo["output"] = {"prefix": options.prefix, "figures": options.figures}
    return echo
