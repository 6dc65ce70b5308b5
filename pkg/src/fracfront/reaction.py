"""Bistable reaction terms and their structural certification.

The canonical nonlinearity is the cubic f(u) = u (u - theta) (1 - u) with
stable zeros 0 and 1 and an unstable zero theta in between.  Tabulated
nonlinearities are supported through a C^1 interpolant.  ``check_conditions``
certifies the bistability structure (three zeros, sign pattern, derivative
signs, positive potential imbalance) by dense sampling and quadrature; it is
a numerical certificate, not a proof.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline, CubicSpline


class ReactionError(ValueError):
    """Invalid reaction construction."""


@dataclass(frozen=True)
class BistableSpec:
    """A bistable nonlinearity with derivative and Lipschitz bound on [0, 1]."""

    kind: str               # "cubic" or "tabulated"
    theta: float
    lip_bound: float
    _f: object = field(repr=False, default=None)
    _fp: object = field(repr=False, default=None)

    def f(self, u):
        return self._f(u)

    def f_prime(self, u):
        return self._fp(u)


def cubic_bistable(theta: float) -> BistableSpec:
    """f(u) = u (u - theta) (1 - u), extended by the same cubic beyond [0, 1]."""
    if not 0.0 < theta < 1.0:
        raise ReactionError(f"theta={theta} outside (0, 1)")

    def f(u):
        u = np.asarray(u, dtype=float)
        return u * (u - theta) * (1.0 - u)

    def fp(u):
        u = np.asarray(u, dtype=float)
        return -3.0 * u * u + 2.0 * (1.0 + theta) * u - theta

    # |f'| extrema on [0,1]: endpoints and the interior parabola vertex
    lip = max(theta, 1.0 - theta, (theta * theta - theta + 1.0) / 3.0)
    return BistableSpec("cubic", float(theta), float(lip), f, fp)


def tabulated_bistable(samples_u, samples_f, samples_fp=None) -> BistableSpec:
    """Bistable nonlinearity from samples on [0, 1].

    Interpolated by a cubic spline (Hermite if derivative samples are given)
    and extended linearly beyond the sample range with the end slopes.
    """
    u = np.asarray(samples_u, dtype=float)
    fv = np.asarray(samples_f, dtype=float)
    if u.ndim != 1 or u.shape != fv.shape or u.size < 4:
        raise ReactionError("tabulated reaction needs matching 1-D samples (>= 4 points)")
    if np.any(np.diff(u) <= 0):
        raise ReactionError("tabulated sample abscissae must increase strictly")
    if samples_fp is not None:
        fp = np.asarray(samples_fp, dtype=float)
        spline = CubicHermiteSpline(u, fv, fp)
    else:
        spline = CubicSpline(u, fv)
    dspline = spline.derivative()
    lo, hi = u[0], u[-1]
    slo, shi = float(dspline(lo)), float(dspline(hi))
    flo, fhi = float(spline(lo)), float(spline(hi))

    def f(x):
        x = np.asarray(x, dtype=float)
        out = spline(np.clip(x, lo, hi))
        out = np.where(x < lo, flo + slo * (x - lo), out)
        out = np.where(x > hi, fhi + shi * (x - hi), out)
        return out

    def fprime(x):
        x = np.asarray(x, dtype=float)
        out = dspline(np.clip(x, lo, hi))
        out = np.where(x < lo, slo, out)
        return np.where(x > hi, shi, out)

    grid = np.linspace(max(lo, 0.0), min(hi, 1.0), 4001)
    vals = f(grid)
    sign_change = np.nonzero((vals[:-1] <= 0) & (vals[1:] > 0))[0]
    if len(sign_change) == 0:
        raise ReactionError("tabulated reaction has no interior zero crossing on [0, 1]")
    i = sign_change[0]
    theta = float(grid[i] - vals[i] * (grid[i + 1] - grid[i]) / (vals[i + 1] - vals[i]))
    lip = float(np.abs(fprime(grid)).max())
    return BistableSpec("tabulated", theta, lip, f, fprime)


def tabulated_from_csv(path) -> BistableSpec:
    """Load a tabulated reaction from CSV columns (u, f) or (u, f, f')."""
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if data.shape[1] == 2:
        return tabulated_bistable(data[:, 0], data[:, 1])
    if data.shape[1] == 3:
        return tabulated_bistable(data[:, 0], data[:, 1], data[:, 2])
    raise ReactionError(f"{path}: expected columns (u, f) or (u, f, f')")


def eval_f(spec: BistableSpec, u):
    return spec.f(u)


def eval_f_prime(spec: BistableSpec, u):
    return spec.f_prime(u)


@dataclass(frozen=True)
class ConditionReport:
    """Clause-by-clause certification of the bistability conditions."""

    roots_ok: bool               # f(0) = f(theta) = f(1) = 0 within 1e-12
    negative_below_theta: bool   # f < 0 on (0, theta), dense sampling
    positive_above_theta: bool   # f > 0 on (theta, 1)
    fprime0_negative: bool
    fprime_theta_positive: bool
    fprime1_negative: bool
    integral: float              # int_0^1 f
    integral_positive: bool
    decay_c0: float              # f' <= -c1 on [1 - c0, 1.5] (extension clause)
    decay_c1: float
    decay_ok: bool
    lip_bound: float

    @property
    def passed(self) -> bool:
        return (self.roots_ok and self.negative_below_theta and self.positive_above_theta
                and self.fprime0_negative and self.fprime_theta_positive
                and self.fprime1_negative and self.integral_positive)

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["passed"] = self.passed
        return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v))
                for k, v in d.items()}


def check_conditions(spec: BistableSpec, n_samples: int = 10_000) -> ConditionReport:
    """Certify the bistable structure of f by sampling and quadrature."""
    th = spec.theta
    roots_ok = bool(max(abs(float(spec.f(0.0))), abs(float(spec.f(th))),
                        abs(float(spec.f(1.0)))) <= 1e-12)
    below = np.linspace(0.0, th, n_samples + 2)[1:-1]
    above = np.linspace(th, 1.0, n_samples + 2)[1:-1]
    neg = bool(np.all(spec.f(below) < 0.0))
    pos = bool(np.all(spec.f(above) > 0.0))
    fp0 = float(spec.f_prime(0.0))
    fpt = float(spec.f_prime(th))
    fp1 = float(spec.f_prime(1.0))
    integral = _simpson_integral(spec, 0.0, 1.0, n_samples)
    c0, c1, decay_ok = _decay_constants(spec)
    return ConditionReport(
        roots_ok=roots_ok,
        negative_below_theta=neg,
        positive_above_theta=pos,
        fprime0_negative=fp0 < 0.0,
        fprime_theta_positive=fpt > 0.0,
        fprime1_negative=fp1 < 0.0,
        integral=integral,
        integral_positive=integral > 1e-10,
        decay_c0=c0,
        decay_c1=c1,
        decay_ok=decay_ok,
        lip_bound=spec.lip_bound,
    )


def _simpson_integral(spec, a, b, n_panels):
    if n_panels % 2 == 1:
        n_panels += 1
    x = np.linspace(a, b, n_panels + 1)
    y = np.asarray(spec.f(x), dtype=float)
    h = (b - a) / n_panels
    return float(h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum()))


def _decay_constants(spec, c0: float = 0.1, hi: float = 1.5):
    """Largest uniform decay rate c1 with f' <= -c1 on [1 - c0, hi] (sampled)."""
    x = np.linspace(1.0 - c0, hi, 2001)
    sup = float(np.max(spec.f_prime(x)))
    return c0, max(-sup, 0.0), bool(sup < 0.0)


def exact_cubic_integral(theta: float) -> float:
    """Closed form of int_0^1 u (u - theta)(1 - u) du = (1 - 2 theta)/12."""
    return (1.0 - 2.0 * theta) / 12.0


def integral_quadrature(spec: BistableSpec) -> float:
    """Adaptive-quadrature value of int_0^1 f, usable as an oracle."""
    val, _ = quad(lambda x: float(spec.f(x)), 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)
    return val
