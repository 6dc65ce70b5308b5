"""1-D fractional bistable traveling fronts and the planar subsolution certificate.

``solve_front`` computes the monotone profile phi and speed c of

    -c phi' + D^s phi + f(phi) = 0,  phi(-inf) = 0,  phi(+inf) = 1,

with D^s the singular 1-D fractional operator, in two phases: a co-moving
relaxation that supplies a basin-of-attraction iterate (the front is
dynamically stable), then a damped Newton iteration on the discretized
stationary system augmented with the phase condition phi(0) = 1/2.  Newton
uses the centered first-derivative stencil at interior nodes, matching the
independent ``front_residual`` certificate; the two endpoint nodes use the
upwind stencil, which suppresses a closure-induced wiggle at the downstream
edge.

Fractional fronts have algebraic tails (|z|^(-2s)), so the constant
far-field closure beyond the grid carries a domain-size bias in c; all
certificates concern the discrete closed system and are exact for it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.interpolate import CubicSpline
from scipy.linalg import solve as dense_solve

from .geometry import Obstacle, is_convex
from .kernels import KernelSpec, marginal_tail_constant
from .operator import (Grid2D, apply_singular_1d_all, singular_tail_coef,
                       singular_weights_1d)
from .reaction import BistableSpec, check_conditions


class FrontSolveError(RuntimeError):
    """Front solver failure; carries the best iterate in .profile when available."""

    def __init__(self, message, profile=None, diagnostics=None):
        super().__init__(message)
        self.profile = profile
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class WaveProfile:
    """A computed front: speed, node values, and its certificates."""

    s: float
    c_norm: float
    speed_c: float
    z: np.ndarray
    phi: np.ndarray
    residual_norm: float
    monotone: bool
    diagnostics: dict = dc_field(default_factory=dict, repr=False)

    @property
    def h(self) -> float:
        return float(self.z[1] - self.z[0])

    @property
    def halfwidth(self) -> float:
        return float(self.z[-1])

    def spans_limits(self, lo: float = 0.01, hi: float = 0.99) -> bool:
        """Whether the grid hosts the transition: phi(-Z) <= lo and phi(Z) >= hi."""
        return bool(self.phi[0] <= lo and self.phi[-1] >= hi)

    def interp(self, zeta) -> np.ndarray:
        """Profile value at arbitrary abscissae, limits beyond the grid."""
        return np.interp(np.asarray(zeta, dtype=float), self.z, self.phi,
                         left=0.0, right=1.0)


def _bistable_structure_ok(reaction: BistableSpec):
    rep = check_conditions(reaction, n_samples=2000)
    ok = (rep.roots_ok and rep.negative_below_theta and rep.positive_above_theta
          and rep.fprime0_negative and rep.fprime_theta_positive and rep.fprime1_negative)
    if not ok:
        raise FrontSolveError(f"reaction is not bistable: {rep.as_dict()}")
    return rep


def _centered_derivative(phi, h, limits):
    d = np.empty_like(phi)
    d[1:-1] = (phi[2:] - phi[:-2]) / (2.0 * h)
    d[0] = (phi[1] - limits[0]) / (2.0 * h)
    d[-1] = (limits[1] - phi[-2]) / (2.0 * h)
    return d


def _transport_derivative(phi, h, c, limits):
    """Centered at interior nodes, upwind by the sign of c at the two endpoints."""
    d = _centered_derivative(phi, h, limits)
    if c > 0.0:
        d[0] = (phi[0] - limits[0]) / h
        d[-1] = (phi[-1] - phi[-2]) / h
    elif c < 0.0:
        d[0] = (phi[1] - phi[0]) / h
        d[-1] = (limits[1] - phi[-1]) / h
    return d


def _phase1_relax(reaction, s, z, c_norm, rate_tol, t_max):
    """Free evolution with integer recentering of the half level set."""
    n = z.size
    h = float(z[1] - z[0])
    W = singular_weights_1d(n, h, s, c_norm)
    ct = singular_tail_coef(n, h, s, c_norm)
    lam = 2.0 * W.sum() + 2.0 * ct
    dt = 0.9 / (lam + reaction.lip_bound)
    phi = 0.5 + np.arctan(z) / np.pi
    t, shift = 0.0, 0.0
    c_est, last = 0.0, None
    window = 400
    n_steps = int(np.ceil(t_max / dt))
    for it in range(n_steps):
        phi = phi + dt * (apply_singular_1d_all(phi, h, s, (0.0, 1.0), c_norm, "fft")
                          + reaction.f(phi))
        t += dt
        idx = int(np.clip(np.searchsorted(phi, 0.5), 1, n - 1))
        zl = z[idx - 1] + (0.5 - phi[idx - 1]) / (phi[idx] - phi[idx - 1]) * h
        if abs(zl) > h:
            k = int(np.round(zl / h))
            phi = np.roll(phi, -k)
            if k > 0:
                phi[-k:] = 1.0
            else:
                phi[:-k] = 0.0
            shift += k * h
        if it % window == window - 1:
            pos = shift + zl
            if last is not None:
                c_new = -(pos - last[0]) / (t - last[1])
                rate = abs(c_new - c_est) / (t - last[1])
                c_est = c_new
                if rate < rate_tol * max(1.0, abs(c_est)):
                    return phi, c_est, t
            last = (pos, t)
    return phi, c_est, t


def solve_front(reaction: BistableSpec, s: float, Z: float = 80.0, n_nodes: int = 4001,
                c_norm: float = 1.0, phase1_rate_tol: float = 1e-4,
                phase1_t_max: float = 120.0, newton_tol: float = 1e-9,
                max_newton: int = 40) -> WaveProfile:
    """Two-phase front solve; returns a profile with residual_norm <= 1e-6.

    n_nodes must be odd so the phase condition phi(0) = 1/2 sits on a node.
    """
    _bistable_structure_ok(reaction)
    if not 0.0 < s < 1.0:
        raise FrontSolveError(f"fractional order s={s} outside (0, 1)")
    if n_nodes % 2 == 0:
        raise FrontSolveError("n_nodes must be odd (phase condition at the center node)")
    if Z < 10.0:
        raise FrontSolveError(f"half-width Z={Z} too small to host a front")
    z = np.linspace(-Z, Z, n_nodes)
    h = float(z[1] - z[0])
    t0 = time.time()
    phi, c, t_relax = _phase1_relax(reaction, s, z, c_norm, phase1_rate_tol, phase1_t_max)
    t_phase1 = time.time() - t0

    n = n_nodes
    i0 = n // 2
    W = singular_weights_1d(n, h, s, c_norm)
    ct = singular_tail_coef(n, h, s, c_norm)
    totW = W.sum()
    diag0 = -2.0 * totW - 2.0 * ct
    toe = np.concatenate([W[::-1], [diag0], W])
    toe_rows = sliding_window_view(toe, n)[::-1]

    def system(phi, c):
        A_phi = apply_singular_1d_all(phi, h, s, (0.0, 1.0), c_norm, "direct")
        d = _transport_derivative(phi, h, c, (0.0, 1.0))
        return A_phi - c * d + reaction.f(phi)

    Jf = np.zeros((n + 1, n + 1), order="F")
    rhs_vec = np.empty(n + 1)
    t0 = time.time()
    best = None
    newton_iters = 0
    for it in range(max_newton):
        F = system(phi, c)
        Fn = float(np.abs(F).max())
        phase = float(phi[i0] - 0.5)
        if best is None or Fn < best[0]:
            best = (Fn, phi.copy(), c)
        if Fn < newton_tol and abs(phase) < 1e-12:
            break
        Jf[:n, :n] = toe_rows
        didx = np.arange(n)
        Jf[didx, didx] += reaction.f_prime(phi)
        inner = np.arange(1, n - 1)
        Jf[inner, inner + 1] += -c / (2.0 * h)
        Jf[inner, inner - 1] += +c / (2.0 * h)
        if c > 0.0:
            Jf[0, 0] += -c / h
            Jf[n - 1, n - 1] += -c / h
            Jf[n - 1, n - 2] += +c / h
        elif c < 0.0:
            Jf[0, 1] += -c / h
            Jf[0, 0] += +c / h
            Jf[n - 1, n - 1] += +c / h
        else:
            Jf[0, 1] += -c / (2.0 * h)
            Jf[n - 1, n - 2] += +c / (2.0 * h)
        Jf[:n, n] = -_transport_derivative(phi, h, c, (0.0, 1.0))
        Jf[n, :] = 0.0
        Jf[n, i0] = 1.0
        rhs_vec[:n] = -F
        rhs_vec[n] = -phase
        dx = dense_solve(Jf, rhs_vec, overwrite_a=True)
        lam = 1.0
        for _ in range(10):
            phi_new = phi + lam * dx[:n]
            c_new = c + lam * dx[n]
            Fn_new = float(np.abs(system(phi_new, c_new)).max())
            if Fn_new < Fn or Fn < 1e-8:
                break
            lam *= 0.5
        phi, c = phi_new, c_new
        newton_iters = it + 1
    t_newton = time.time() - t0

    monotone = bool(np.all(np.diff(phi) >= -1e-12))
    prof = WaveProfile(float(s), float(c_norm), float(c), z, phi, np.nan, monotone,
                       diagnostics={
                           "phase1_time": t_phase1, "phase1_t": t_relax,
                           "newton_time": t_newton, "newton_iters": newton_iters,
                           "newton_residual": Fn, "phase_defect": phase,
                           "phi_left": float(phi[0]), "phi_right": float(phi[-1]),
                       })
    res = front_residual(prof, reaction)
    object.__setattr__(prof, "residual_norm", float(res))
    if res > 1e-6:
        raise FrontSolveError(
            f"front residual {res:.3e} above 1e-6 after {newton_iters} Newton iterations",
            profile=prof, diagnostics=prof.diagnostics)
    return prof


def front_residual(profile: WaveProfile, reaction: BistableSpec) -> float:
    """Independent residual certificate: max over interior nodes of
    |-c phi' + D^s phi + f(phi)| with centered phi' and limits 0/1 in the tail."""
    phi, h = profile.phi, profile.h
    op = apply_singular_1d_all(phi, h, profile.s, (0.0, 1.0), profile.c_norm, "direct")
    d = _centered_derivative(phi, h, (0.0, 1.0))
    F = -profile.speed_c * d + op + reaction.f(phi)
    return float(np.abs(F[1:-1]).max())


@dataclass(frozen=True)
class PlanarSubsolutionReport:
    """Certificate data for the planar-front subsolution inequality on a half-space."""

    min_value: float          # min over exterior cells in the half-space of L phi + f(phi)
    lower_bound: float        # c * min phi' over the same cells (the continuum bound)
    offset: float
    n_cells: int
    argmin: tuple[float, float]
    correction_min: float     # min of the obstacle correction (should be >= 0)
    values: np.ndarray = dc_field(repr=False, default=None)
    values_free: np.ndarray = dc_field(repr=False, default=None)

    @property
    def positive(self) -> bool:
        return self.min_value > 0.0


def planar_subsolution_check(profile: WaveProfile, e, r: float, grid: Grid2D,
                             obstacle: Obstacle, kernel: KernelSpec,
                             reaction: BistableSpec,
                             offset: float | None = None) -> PlanarSubsolutionReport:
    """Evaluate L phi_{e,r} + f(phi_{e,r}) over the half-space {x.e > offset}.

    The regional operator is split as the free-space part minus the obstacle
    correction.  On planar fields the free-space part reduces exactly to the
    1-D operator along e, so it is evaluated from the profile's own discrete
    operator (interpolated between nodes); the correction is the direct sum
    over obstacle cells with the marginal-consistent planar kernel, i.e. the
    2-D power law whose line marginal reproduces the profile's 1-D law
    (c2 = c_norm / kappa_s).  For a monotone profile and an obstacle below
    the half-space the correction is nonnegative, so the certified minimum
    is bounded below by c * min phi' up to interpolation error.
    """
    e = np.asarray(e, dtype=float)
    ne = np.linalg.norm(e)
    if ne == 0:
        raise ValueError("direction e must be nonzero")
    e = e / ne
    if not profile.monotone:
        raise ValueError("planar subsolution check needs a monotone profile")
    if not is_convex(obstacle):
        raise ValueError("planar subsolution check needs a convex obstacle")
    if kernel.dim != 2 or abs(kernel.s - profile.s) > 1e-12:
        raise ValueError("kernel must be 2-D with the profile's fractional order")
    sup = obstacle.support(e)
    if offset is None:
        offset = sup + grid.h
    if sup > offset + 1e-12:
        raise ValueError(
            f"obstacle support {sup:.6g} along e exceeds the half-space offset {offset:.6g}")

    s = profile.s
    kappa = marginal_tail_constant(s)
    c2 = profile.c_norm / kappa

    op_nodes = apply_singular_1d_all(profile.phi, profile.h, s, (0.0, 1.0),
                                     profile.c_norm, "direct")
    free_spline = CubicSpline(profile.z, op_nodes + np.asarray(reaction.f(profile.phi)))
    phi_spline = CubicSpline(profile.z, profile.phi)
    dphi_spline = phi_spline.derivative()

    X, Y = grid.cell_centers()
    zeta = X * e[0] + Y * e[1] - r
    if zeta.min() < profile.z[0] or zeta.max() > profile.z[-1]:
        raise ValueError("grid projections leave the profile domain; enlarge Z")
    sel = grid.mask & (X * e[0] + Y * e[1] > offset)
    if not sel.any():
        raise ValueError("no exterior cells in the half-space")
    zsel = zeta[sel]
    free_vals = free_spline(zsel)

    # obstacle correction: integral over K of k2(x - y)(phi(y.e - r) - phi(x.e - r))
    oy, ox = np.nonzero(~grid.mask)
    corr = np.zeros(zsel.shape)
    if len(ox) > 0:
        ax = grid.axis_centers()
        obs_pts = np.column_stack([ax[ox], ax[oy]])
        cell_pts = np.column_stack([X[sel], Y[sel]])
        dx = cell_pts[:, 0][:, None] - obs_pts[None, :, 0]
        dy = cell_pts[:, 1][:, None] - obs_pts[None, :, 1]
        rad = np.hypot(dx, dy)
        kvals = grid.h ** 2 * c2 / (kernel.delta + rad ** (2.0 + 2.0 * s))
        phi_obs = phi_spline(obs_pts @ e - r)
        phi_cell = phi_spline(zsel)
        integral = np.sum(kvals * (phi_obs[None, :] - phi_cell[:, None]), axis=1)
        corr = -integral  # subtracting the K-part of the free-space integral
    vals = free_vals + corr
    imin = int(np.argmin(vals))
    cells = np.column_stack([X[sel], Y[sel]])
    lower = profile.speed_c * float(np.min(dphi_spline(zsel)))
    return PlanarSubsolutionReport(
        min_value=float(vals[imin]),
        lower_bound=lower,
        offset=float(offset),
        n_cells=int(sel.sum()),
        argmin=(float(cells[imin, 0]), float(cells[imin, 1])),
        correction_min=float(corr.min()) if corr.size else 0.0,
        values=vals,
        values_free=free_vals,
    )
