"""Forward-Euler evolution of du/dt = L u + f(u) on the masked grid.

Forward Euler is deliberate: with the step bound of ``stable_dt`` the update
is a convex combination of field values plus a reaction increment vanishing
at 0 and 1, so [0,1]-valued fields stay in [0,1] exactly and two ordered
fields stay ordered (the discrete comparison principle).  Those two facts
are what the rigidity checks consume; temporal accuracy is secondary.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .geometry import Obstacle
from .kernels import KernelSpec
from .operator import ApplyPlan, Field, Grid2D, OperatorError, apply_fast, build_plan
from .reaction import BistableSpec


class EvolutionError(RuntimeError):
    """Time integration failure (instability, NaN, budget exhaustion)."""


DT_SAFETY = 0.9


@dataclass(frozen=True)
class InitialSpec:
    """Initial data: 'heaviside' (1 on {x.d < offset}), 'constant', or 'custom'."""

    kind: str
    direction: tuple[float, float] = (1.0, 0.0)
    offset: float = 0.0
    value: float = 0.0
    path: str | None = None

    def build(self, grid: Grid2D) -> np.ndarray:
        if self.kind == "heaviside":
            d = np.asarray(self.direction, dtype=float)
            nd = np.linalg.norm(d)
            if nd == 0:
                raise EvolutionError("heaviside initial condition needs a nonzero direction")
            d = d / nd
            X, Y = grid.cell_centers()
            return np.where(X * d[0] + Y * d[1] < self.offset, 1.0, 0.0)
        if self.kind == "constant":
            return np.full(grid.mask.shape, float(self.value))
        if self.kind == "custom":
            from .outputs import read_field_csv
            vals = read_field_csv(self.path)
            if vals.shape != grid.mask.shape:
                raise EvolutionError(
                    f"custom initial condition shape {vals.shape} does not match the grid")
            return np.where(grid.mask, np.nan_to_num(vals, nan=0.0), 0.0)
        raise EvolutionError(f"unknown initial condition kind {self.kind!r}")


@dataclass(frozen=True)
class SimConfig:
    """Everything one evolution run needs, with validated snapshot schedule."""

    grid_halfwidth: float
    grid_cells: int
    obstacle: Obstacle
    kernel: KernelSpec
    reaction: BistableSpec
    t_end: float
    snapshot_times: tuple[float, ...]
    dt: float | None          # None means the stability bound
    steady_tol: float
    initial: InitialSpec
    farfield: float
    workers: int | None = None

    def __post_init__(self):
        if self.t_end <= 0:
            raise EvolutionError(f"t_end={self.t_end} must be positive")
        for t in self.snapshot_times:
            if t < 0 or t > self.t_end:
                raise EvolutionError(f"snapshot time {t} outside [0, {self.t_end}]")
        if list(self.snapshot_times) != sorted(self.snapshot_times):
            raise EvolutionError("snapshot times must be ascending")
        if not 0.0 <= self.farfield <= 1.0:
            raise EvolutionError(f"farfield={self.farfield} outside [0, 1]")
        if self.steady_tol <= 0:
            raise EvolutionError("steady_tol must be positive")

    def make_grid(self) -> Grid2D:
        return Grid2D.square(self.grid_halfwidth, self.grid_cells, self.obstacle)


@dataclass
class Trajectory:
    """Recorded run: snapshots at requested times plus per-step extrema."""

    snapshots: list[tuple[float, Field]]
    times: np.ndarray
    min_history: np.ndarray
    max_history: np.ndarray
    residual_history: np.ndarray
    final_residual: float
    steady_reached: bool
    steps: int
    wall_time: float
    config: SimConfig | None = None

    @property
    def final_field(self) -> Field:
        return self.snapshots[-1][1]

    def validate(self):
        ts = [t for t, _ in self.snapshots]
        if any(t1 >= t2 for t1, t2 in zip(ts, ts[1:])):
            raise EvolutionError("snapshot times are not strictly increasing")
        for t, fld in self.snapshots:
            if not fld.in_unit_interval():
                raise EvolutionError(f"snapshot at t={t} leaves [0, 1]")


def stable_dt(grid: Grid2D, kernel: KernelSpec, reaction: BistableSpec | None,
              plan: ApplyPlan | None = None) -> float:
    """Largest admitted explicit step: DT_SAFETY / (Lambda_max + lip_bound).

    Lambda_max is the largest per-cell total interaction weight (exterior sum
    plus tail).  With this step the update map is monotone and maps
    [0,1]-valued fields to [0,1]-valued fields.
    """
    if plan is None:
        plan = build_plan(grid, kernel)
    from .operator import operator_weights_nonneg
    ok, rep = operator_weights_nonneg(grid, kernel)
    if not ok:
        raise EvolutionError(f"negative operator weights detected: {rep.as_dict()}")
    lip = 0.0 if reaction is None else reaction.lip_bound
    return DT_SAFETY / (plan.lambda_max + lip)


def rhs(fld: Field, plan: ApplyPlan, reaction: BistableSpec) -> np.ndarray:
    """L u + f(u) on exterior cells (zero elsewhere)."""
    out = apply_fast(fld, plan) + np.where(fld.grid.mask, reaction.f(fld.values), 0.0)
    return np.where(fld.grid.mask, out, 0.0)


def residual(fld: Field, plan: ApplyPlan, reaction: BistableSpec) -> float:
    """Max-norm steady-state defect ||L u + f(u)||_inf over exterior cells."""
    r = rhs(fld, plan, reaction)
    return float(np.abs(r[fld.grid.mask]).max())


def step(fld: Field, dt: float, plan: ApplyPlan, reaction: BistableSpec,
         max_dt: float | None = None) -> Field:
    """One forward-Euler step; refuses steps beyond the stability bound."""
    if max_dt is None:
        max_dt = DT_SAFETY / (plan.lambda_max + reaction.lip_bound)
    if dt > max_dt * (1.0 + 1e-12):
        raise EvolutionError(f"dt={dt} exceeds the stability bound {max_dt}")
    r = rhs(fld, plan, reaction)
    if not np.isfinite(r).all():
        bad = np.argwhere(~np.isfinite(r))[0]
        raise EvolutionError(f"non-finite right-hand side at cell {tuple(bad)}")
    return fld.with_values(fld.values + dt * r)


def simulate(config: SimConfig, plan: ApplyPlan | None = None,
             check_interval: bool = True) -> Trajectory:
    """Integrate to t_end, recording snapshots and per-step extrema.

    Stops early once the steady-state residual falls below steady_tol,
    provided every requested snapshot has been emitted (the remaining
    schedule would repeat the steady field).
    """
    t0 = time.time()
    grid = config.make_grid()
    if plan is None:
        plan = build_plan(grid, config.kernel, workers=config.workers)
    dt_max = stable_dt(grid, config.kernel, config.reaction, plan)
    dt = dt_max if config.dt is None else config.dt
    if dt > dt_max * (1.0 + 1e-12):
        raise EvolutionError(f"configured dt={dt} exceeds the stability bound {dt_max}")
    u = Field(grid, config.initial.build(grid), config.farfield)
    if not u.in_unit_interval():
        raise EvolutionError("initial condition leaves [0, 1]")

    pending = list(config.snapshot_times)
    snapshots: list[tuple[float, Field]] = []
    if pending and pending[0] == 0.0:
        snapshots.append((0.0, u))
        pending.pop(0)

    times, mins, maxs, resids = [], [], [], []
    t, n_steps = 0.0, 0
    steady = residual(u, plan, config.reaction) < config.steady_tol
    while not steady and t < config.t_end - dt / 2.0:
        r = rhs(u, plan, config.reaction)
        if not np.isfinite(r).all():
            raise EvolutionError(f"non-finite right-hand side at t={t}")
        u = u.with_values(u.values + dt * r)
        t += dt
        n_steps += 1
        res = float(np.abs(r[grid.mask]).max())  # defect of the pre-step field
        times.append(t)
        mins.append(u.exterior_min())
        maxs.append(u.exterior_max())
        resids.append(res)
        if check_interval and not u.in_unit_interval():
            raise EvolutionError(f"field left [0, 1] at t={t}")
        while pending and t >= pending[0] - dt / 2.0:
            snapshots.append((t, u))
            pending.pop(0)
        if res < config.steady_tol and not pending:
            steady = True
    if not snapshots or snapshots[-1][0] < t:
        snapshots.append((t, u))
    final_res = residual(u, plan, config.reaction)
    traj = Trajectory(snapshots, np.asarray(times), np.asarray(mins), np.asarray(maxs),
                      np.asarray(resids), final_res, steady or final_res < config.steady_tol,
                      n_steps, time.time() - t0, config)
    traj.validate()
    return traj
