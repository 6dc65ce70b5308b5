"""Numerical enactment of the Liouville rigidity mechanism.

A certified run (convex obstacle, bistable reaction, far-field closure 1)
evolves to its steady state and checks the three pillars of the rigidity
argument: the steady state is uniformly close to 1, the sliding scan of the
planar front family finds no finite infimal translation ("below-grid", the
discrete stand-in for r* = -inf), and the discrete comparison principles
hold on random half-space instances.  Non-certifying exploratory runs on
non-convex obstacles are possible behind an explicit override.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .evolution import SimConfig, Trajectory, simulate, stable_dt, rhs as evolution_rhs
from .geometry import GeometryError, HalfSpace, Obstacle, is_convex, separating_halfspace
from .kernels import KernelSpec
from .operator import ApplyPlan, Field, Grid2D, build_plan, operator_weights_nonneg
from .reaction import BistableSpec, check_conditions
from .waves import WaveProfile

BELOW_GRID = "below-grid"


class LiouvilleError(RuntimeError):
    """Hypothesis violation or failure to reach a steady state."""


@dataclass(frozen=True)
class LiouvilleReport:
    steady_min: float
    gamma_observed: float
    r_star_estimate: dict          # direction label -> float or "below-grid"
    maxprinciple_pass: bool
    convexity_certified: bool
    certifying: bool
    tol_one: float
    final_residual: float
    steps: int

    def as_dict(self) -> dict:
        return {
            "steady_min": float(self.steady_min),
            "gamma_observed": float(self.gamma_observed),
            "r_star_estimate": {k: (v if isinstance(v, str) else float(v))
                                for k, v in self.r_star_estimate.items()},
            "maxprinciple_pass": bool(self.maxprinciple_pass),
            "convexity_certified": bool(self.convexity_certified),
            "certifying": bool(self.certifying),
            "tol_one": float(self.tol_one),
            "final_residual": float(self.final_residual),
            "steps": int(self.steps),
        }

    @property
    def passed(self) -> bool:
        below = all(v == BELOW_GRID for v in self.r_star_estimate.values())
        return (self.certifying and self.steady_min >= 1.0 - self.tol_one
                and below and self.maxprinciple_pass)


SLIDE_TOL = 1e-9


def sliding_r_star(u: Field, profile: WaveProfile, e,
                   tol_slide: float = SLIDE_TOL):
    """Bisection estimate of r* = inf{r : phi(x.e - r) <= u(x) on exterior cells}.

    Scans r in [-3L, 3L]; returns "below-grid" when even r = -3L satisfies
    the ordering (the discrete shadow of r* = -inf), otherwise the infimum
    to one-grid-cell resolution.
    """
    e = np.asarray(e, dtype=float)
    e = e / np.linalg.norm(e)
    if not profile.monotone:
        raise LiouvilleError("sliding needs a monotone profile")
    grid = u.grid
    X, Y = grid.cell_centers()
    proj = (X * e[0] + Y * e[1])[grid.mask]
    vals = u.values[grid.mask]
    L = grid.halfwidth

    def ordered(r):
        return bool(np.all(profile.interp(proj - r) <= vals + tol_slide))

    lo, hi = -3.0 * L, 3.0 * L
    if ordered(lo):
        return BELOW_GRID
    if not ordered(hi):
        # profile exceeds the field even when pushed entirely past the grid
        return float(np.inf)
    while hi - lo > grid.h / 4.0:
        mid = 0.5 * (lo + hi)
        if ordered(mid):
            hi = mid
        else:
            lo = mid
    return float(hi)


def claim_r0_exists(u: Field, profile: WaveProfile, e) -> float:
    """Explicit translation r0 with phi(x.e - r0) <= u(x) everywhere.

    Pushes the front right until its largest on-grid value falls below the
    field minimum, then verifies the pointwise ordering.  Requires min u > 0.
    """
    e = np.asarray(e, dtype=float)
    e = e / np.linalg.norm(e)
    grid = u.grid
    vals = u.values[grid.mask]
    umin = float(vals.min())
    if umin <= 0.0:
        raise LiouvilleError("claim_r0 needs min u > 0 (the positivity floor)")
    X, Y = grid.cell_centers()
    proj = (X * e[0] + Y * e[1])[grid.mask]
    pmax = float(proj.max())
    # scan r upward: the first translation whose largest on-grid profile value
    # drops below the field minimum, then verify the full pointwise ordering
    r_scan = np.arange(-3.0 * grid.halfwidth,
                       pmax + profile.halfwidth + 2.0 * grid.h, grid.h)
    for r in r_scan:
        if profile.interp(pmax - r) <= umin:
            if np.all(profile.interp(proj - r) <= vals):
                return float(r)
    raise LiouvilleError("no admissible r0 found in the scan range")


@dataclass(frozen=True)
class WeakMaxInstance:
    halfspace: HalfSpace
    hypothesis_ok: bool
    violation_cell: tuple[float, float] | None
    min_gap: float                 # min of u - v after relaxation
    ordering_ok: bool


@dataclass(frozen=True)
class WeakMaxReport:
    passed: bool
    n_instances: int
    instances: list = dc_field(repr=False, default_factory=list)
    min_gap: float = np.nan

    def as_dict(self):
        return {"passed": bool(self.passed), "n_instances": self.n_instances,
                "min_gap": float(self.min_gap)}


def _random_halfspace(obstacle: Obstacle, grid: Grid2D, rng) -> HalfSpace:
    L = grid.halfwidth
    for _ in range(200):
        x0 = rng.uniform(-0.9 * L, 0.9 * L, size=2)
        try:
            hs = separating_halfspace(obstacle, x0)
        except GeometryError:
            continue
        # need some exterior cells on both sides
        X, Y = grid.cell_centers()
        side = (X * hs.e[0] + Y * hs.e[1] > hs.offset)[grid.mask]
        if 0 < side.sum() < side.size:
            return hs
    raise LiouvilleError("could not sample a separating half-space")


def discrete_weak_max_test(kernel: KernelSpec, grid: Grid2D, obstacle: Obstacle,
                           reaction: BistableSpec, n_random: int = 10,
                           seed: int = 0, n_steps: int = 120,
                           corrupt: bool = False) -> tuple[bool, WeakMaxReport]:
    """Half-space comparison test, the checkable analogue of the weak maximum principle.

    Each instance builds a supersolution u (1 with a random dip supported
    below the half-space, relaxed a few steps) and a subsolution v (a
    constant level in (theta, 1) below the dip), checks the ordering
    hypotheses (u >= 1 - c0 on H, v <= u off H, ordered far fields), then
    relaxes both with the evolution map and asserts v <= u everywhere at
    every step.  With ``corrupt`` the v field is bumped above u at one cell
    below the half-space; the hypothesis check must detect it.
    """
    ok_w, wrep = operator_weights_nonneg(grid, kernel)
    if not ok_w:
        raise LiouvilleError(f"operator weights are not nonnegative: {wrep.as_dict()}")
    cond = check_conditions(reaction)
    if not cond.decay_ok:
        raise LiouvilleError("reaction extension violates the decay hypothesis f' <= -c1")
    c0 = cond.decay_c0
    rng = np.random.default_rng(seed)
    plan = build_plan(grid, kernel)
    dt = stable_dt(grid, kernel, reaction, plan)
    X, Y = grid.cell_centers()
    instances = []
    all_pass = True
    gmin = np.inf
    for _ in range(n_random):
        hs = _random_halfspace(obstacle, grid, rng)
        inside_h = (X * hs.e[0] + Y * hs.e[1] > hs.offset) & grid.mask
        below = grid.mask & ~inside_h
        # supersolution: identically 1 on H, a smooth random dip below it
        depth = rng.uniform(0.2, 0.8) * c0
        cxy = np.column_stack([X[below], Y[below]])[rng.integers(below.sum())]
        width = rng.uniform(0.5, 1.5) * grid.halfwidth / 3.0
        bump = depth * np.exp(-(((X - cxy[0]) ** 2 + (Y - cxy[1]) ** 2) / width ** 2))
        u = Field(grid, np.where(below, 1.0 - bump, 1.0), 1.0)
        # subsolution: constant level strictly between theta and the dip floor
        floor = float(u.values[grid.mask].min())
        beta = reaction.theta + rng.uniform(0.3, 0.9) * (floor - reaction.theta)
        v = Field(grid, np.full_like(u.values, beta), beta)
        if corrupt:
            by, bx = np.nonzero(below)
            k = int(np.argmin(u.values[below]))
            vv = v.values.copy()
            vv[by[k], bx[k]] = u.values[by[k], bx[k]] + 0.05
            v = v.with_values(vv)
        hyp_ok, viol = _weak_max_hypotheses(u, v, plan, reaction, inside_h, below, c0)
        if corrupt:
            detected = not hyp_ok
            instances.append(WeakMaxInstance(hs, hyp_ok, viol, np.nan, False))
            all_pass = all_pass and detected
            continue
        if not hyp_ok:
            instances.append(WeakMaxInstance(hs, False, viol, np.nan, False))
            all_pass = False
            continue
        ordering = True
        gap = np.inf
        for _ in range(n_steps):
            u = u.with_values(u.values + dt * evolution_rhs(u, plan, reaction))
            v = v.with_values(v.values + dt * evolution_rhs(v, plan, reaction))
            diff = (u.values - v.values)[grid.mask]
            gap = min(gap, float(diff.min()))
            if diff.min() < -1e-12:
                ordering = False
                break
        gmin = min(gmin, gap)
        instances.append(WeakMaxInstance(hs, True, None, gap, ordering))
        all_pass = all_pass and ordering
    report = WeakMaxReport(all_pass, n_random, instances, gmin)
    return all_pass, report


def _weak_max_hypotheses(u: Field, v: Field, plan, reaction, inside_h, below, c0):
    """Validate the half-space comparison hypotheses; returns (ok, violation cell)."""
    grid = u.grid
    if float(u.values[inside_h].min()) < 1.0 - c0 - 1e-12:
        return False, _argmin_cell(np.where(inside_h, u.values, np.inf))
    diff = u.values - v.values
    if float(diff[below].min()) < -1e-12:
        return False, _argmin_cell(np.where(below, diff, np.inf))
    if v.farfield > u.farfield:
        return False, None
    ru = evolution_rhs(u, plan, reaction)
    if float(ru[inside_h].max()) > 1e-10:
        return False, _argmin_cell(np.where(inside_h, -ru, np.inf))
    rv = evolution_rhs(v, plan, reaction)
    if float(rv[inside_h].min()) < -1e-10:
        return False, _argmin_cell(np.where(inside_h, rv, np.inf))
    return True, None


def _argmin_cell(arr):
    iy, ix = np.unravel_index(int(np.argmin(arr)), arr.shape)
    return (int(iy), int(ix))


@dataclass(frozen=True)
class StrongMaxReport:
    verdict: str                   # "identically equal" or "contradiction: touching forbidden"
    touching_cell: tuple[int, int]
    max_gap: float                 # largest u - v over the connected half-space cells
    n_connected: int

    def as_dict(self):
        return {"verdict": self.verdict, "touching_cell": list(self.touching_cell),
                "max_gap": float(self.max_gap), "n_connected": int(self.n_connected)}


def discrete_strong_max_probe(u: Field, v: Field, halfspace: HalfSpace,
                              kernel: KernelSpec,
                              touch_tol: float = 1e-10,
                              equal_tol: float = 1e-9) -> StrongMaxReport:
    """Propagation-of-touching probe, the discrete shadow of the strong maximum principle.

    Requires v <= u everywhere and a touching cell in the closed half-space.
    Reports whether u - v vanishes across every half-space cell reachable
    from the touching cell through positive kernel weights; if not, the
    verdict is the contradiction the rigidity proof extracts from a strict
    supersolution touching a strict subsolution.
    """
    grid = u.grid
    if not grid.same_layout(v.grid):
        raise LiouvilleError("fields live on different grids")
    diff = np.where(grid.mask, u.values - v.values, np.inf)
    if float(diff[grid.mask].min()) < -1e-12:
        raise LiouvilleError("ordering precondition v <= u violated")
    X, Y = grid.cell_centers()
    closed_h = grid.mask & (X * halfspace.e[0] + Y * halfspace.e[1] >= halfspace.offset - 1e-12)
    if not closed_h.any():
        raise LiouvilleError("half-space contains no exterior cells")
    dh = np.where(closed_h, diff, np.inf)
    iy, ix = np.unravel_index(int(np.argmin(dh)), dh.shape)
    if dh[iy, ix] > touch_tol:
        raise LiouvilleError(
            f"no touching point: min(u - v) = {dh[iy, ix]:.3e} > {touch_tol} on the half-space")
    connected = _positive_weight_component(grid, kernel, (iy, ix), closed_h)
    max_gap = float(diff[connected].max())
    verdict = "identically equal" if max_gap <= equal_tol else "contradiction: touching forbidden"
    return StrongMaxReport(verdict, (int(iy), int(ix)), max_gap, int(connected.sum()))


def _positive_weight_component(grid: Grid2D, kernel: KernelSpec, seed_cell, region):
    """Cells of ``region`` reachable from the seed through positive interaction weights."""
    from .operator import kernel_stencil

    st = kernel_stencil(grid, kernel)
    n = grid.n_cells
    reach = np.zeros_like(region, dtype=bool)
    reach[seed_cell] = True
    frontier = [seed_cell]
    while frontier:
        a, b = frontier.pop()
        w = st[n - 1 - a:2 * n - 1 - a, n - 1 - b:2 * n - 1 - b]
        new = region & (w > 0.0) & ~reach
        if new.any():
            ys, xs = np.nonzero(new)
            reach[ys, xs] = True
            frontier.extend(zip(ys.tolist(), xs.tolist()))
    return reach & region


def check_liouville(config: SimConfig, tol_one: float = 0.05,
                    profile: WaveProfile | None = None,
                    allow_nonconvex: bool = False,
                    directions=((1.0, 0.0), (0.0, 1.0), (1.0, 1.0)),
                    maxprinciple_instances: int = 5,
                    seed: int = 0) -> tuple[LiouvilleReport, Trajectory]:
    """Run the obstacle problem to steady state and certify the rigidity pillars.

    Preconditions: convex obstacle (unless explicitly overridden, which makes
    the report non-certifying), bistable reaction, far-field closure 1.
    gamma_observed is the trajectory floor over post-initial steps; the
    initial data may contain exact zeros.
    """
    convex = is_convex(config.obstacle)
    if not convex and not allow_nonconvex:
        raise LiouvilleError(
            "non-convex obstacle: the rigidity theorems assume convexity "
            "(pass allow_nonconvex for a non-certifying exploratory run)")
    if config.farfield != 1.0:
        raise LiouvilleError("Liouville runs need the far-field closure set to 1")
    cond = check_conditions(config.reaction)
    if not cond.passed:
        raise LiouvilleError(f"reaction fails the bistability certification: {cond.as_dict()}")

    traj = simulate(config)
    if not traj.steady_reached:
        raise LiouvilleError(
            f"no steady state within t_end={config.t_end}: residual {traj.final_residual:.3e}")
    steady = traj.final_field
    steady_min = steady.exterior_min()
    gamma = float(traj.min_history.min()) if traj.min_history.size else steady_min

    r_star = {}
    if profile is not None:
        for d in directions:
            e = np.asarray(d, dtype=float)
            e = e / np.linalg.norm(e)
            label = f"({d[0]:g},{d[1]:g})"
            r_star[label] = sliding_r_star(steady, profile, e)

    grid = steady.grid
    mp_ok = True
    if maxprinciple_instances > 0 and convex:
        mp_ok, _ = discrete_weak_max_test(config.kernel, grid, config.obstacle,
                                          config.reaction, maxprinciple_instances,
                                          seed=seed)
    certifying = convex
    report = LiouvilleReport(
        steady_min=steady_min,
        gamma_observed=gamma,
        r_star_estimate=r_star,
        maxprinciple_pass=bool(mp_ok),
        convexity_certified=convex,
        certifying=certifying,
        tol_one=tol_one,
        final_residual=traj.final_residual,
        steps=traj.steps,
    )
    return report, traj
