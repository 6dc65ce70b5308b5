"""Compact planar obstacles and the convexity queries used by the rigidity checks.

Obstacles are immutable closed sets K given as a disk, ellipse, polygon, or
grid-aligned raster mask.  Besides membership and rasterization they expose
the two convexity-specific operations the sliding machinery needs: outward
boundary normals and separating (supporting) half-spaces through exterior
points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import ConvexHull, QhullError


class GeometryError(ValueError):
    """Invalid obstacle construction or query."""


ANALYTIC_BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class HalfSpace:
    """The open affine half-space {x : x.e > offset} with |e| = 1."""

    e: np.ndarray
    offset: float

    def __post_init__(self):
        e = np.asarray(self.e, dtype=float)
        if e.shape != (2,) or abs(np.linalg.norm(e) - 1.0) > 1e-12:
            raise GeometryError(f"half-space direction {e} is not a unit 2-vector")
        object.__setattr__(self, "e", e)

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return pts @ self.e > self.offset


class Obstacle:
    """Base class: a bounded closed set in the plane."""

    declared_convex: bool = False

    def contains_many(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def bounding_box(self) -> tuple[float, float, float, float]:
        """(xmin, xmax, ymin, ymax)."""
        raise NotImplementedError

    def project(self, x: np.ndarray) -> np.ndarray:
        """Euclidean projection of an exterior point onto K."""
        raise NotImplementedError

    def support(self, e: np.ndarray) -> float:
        """Support function max_{y in K} y.e."""
        raise NotImplementedError

    def boundary_normal(self, x: np.ndarray, tol: float) -> np.ndarray:
        raise NotImplementedError

    def is_empty(self) -> bool:
        return False


@dataclass(frozen=True)
class Disk(Obstacle):
    center: tuple[float, float]
    radius: float
    declared_convex: bool = True

    def __post_init__(self):
        if self.radius < 0:
            raise GeometryError(f"disk radius {self.radius} is negative")

    def is_empty(self):
        return self.radius == 0.0

    def contains_many(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        d2 = (pts[:, 0] - self.center[0]) ** 2 + (pts[:, 1] - self.center[1]) ** 2
        return (d2 <= self.radius ** 2) & (self.radius > 0)

    def bounding_box(self):
        cx, cy = self.center
        r = self.radius
        return (cx - r, cx + r, cy - r, cy + r)

    def project(self, x):
        v = np.asarray(x, dtype=float) - self.center
        d = np.linalg.norm(v)
        if d == 0.0:
            raise GeometryError("projection direction undefined at the disk center")
        return np.asarray(self.center) + v * min(1.0, self.radius / d)

    def support(self, e):
        return float(np.dot(self.center, e)) + self.radius

    def boundary_normal(self, x, tol):
        v = np.asarray(x, dtype=float) - self.center
        d = np.linalg.norm(v)
        if abs(d - self.radius) > tol:
            raise GeometryError(f"point {x} is not within {tol} of the disk boundary")
        return v / d


@dataclass(frozen=True)
class Ellipse(Obstacle):
    center: tuple[float, float]
    semi_axes: tuple[float, float]
    declared_convex: bool = True

    def __post_init__(self):
        a, b = self.semi_axes
        if a <= 0 or b <= 0:
            raise GeometryError(f"ellipse semi-axes {self.semi_axes} must be positive")

    def _level(self, pts):
        a, b = self.semi_axes
        return ((pts[:, 0] - self.center[0]) / a) ** 2 + ((pts[:, 1] - self.center[1]) / b) ** 2

    def contains_many(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return self._level(pts) <= 1.0

    def bounding_box(self):
        cx, cy = self.center
        a, b = self.semi_axes
        return (cx - a, cx + a, cy - b, cy + b)

    def project(self, x):
        a, b = self.semi_axes
        v = np.asarray(x, dtype=float) - self.center
        if self._level(np.atleast_2d(np.asarray(x, float)))[0] <= 1.0:
            return np.asarray(x, dtype=float)
        # closest boundary point solves p_i = a_i^2 v_i / (a_i^2 + t), t > 0
        def g(t):
            return (a * v[0] / (a * a + t)) ** 2 + (b * v[1] / (b * b + t)) ** 2 - 1.0
        hi = max(a, b) * (np.linalg.norm(v) + max(a, b))
        t = brentq(g, 0.0, hi, xtol=1e-14, rtol=1e-15)
        p = np.array([a * a * v[0] / (a * a + t), b * b * v[1] / (b * b + t)])
        return p + self.center

    def support(self, e):
        a, b = self.semi_axes
        return float(np.dot(self.center, e)) + np.hypot(a * e[0], b * e[1])

    def boundary_normal(self, x, tol):
        a, b = self.semi_axes
        v = np.asarray(x, dtype=float) - self.center
        # distance-to-boundary estimate via the level function gradient
        lev = (v[0] / a) ** 2 + (v[1] / b) ** 2
        grad = np.array([2 * v[0] / a ** 2, 2 * v[1] / b ** 2])
        gn = np.linalg.norm(grad)
        if gn == 0.0 or abs(lev - 1.0) / gn > tol:
            raise GeometryError(f"point {x} is not within {tol} of the ellipse boundary")
        return grad / gn


@dataclass(frozen=True)
class ConvexPolygon(Obstacle):
    """Polygon with vertices in counterclockwise order.

    A reflex chain is constructible (is_convex reports False) so that the
    convexity gate downstream has something to refuse.
    """

    vertices: np.ndarray
    declared_convex: bool = True

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[0] < 3 or verts.shape[1] != 2:
            raise GeometryError("polygon needs at least 3 planar vertices")
        area2 = _signed_area2(verts)
        if area2 <= 0:
            raise GeometryError("polygon vertices must be in counterclockwise order")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "declared_convex", bool(_convex_chain(verts)))

    def contains_many(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.declared_convex:
            inside = np.ones(len(pts), dtype=bool)
            v = self.vertices
            for p0, p1 in zip(v, np.roll(v, -1, axis=0)):
                edge = p1 - p0
                rel = pts - p0
                inside &= edge[0] * rel[:, 1] - edge[1] * rel[:, 0] >= -1e-12
            return inside
        return _raycast_contains(self.vertices, pts)

    def bounding_box(self):
        v = self.vertices
        return (v[:, 0].min(), v[:, 0].max(), v[:, 1].min(), v[:, 1].max())

    def project(self, x):
        x = np.asarray(x, dtype=float)
        if self.contains_many(x[None, :])[0]:
            return x
        best, bd = None, np.inf
        v = self.vertices
        for p0, p1 in zip(v, np.roll(v, -1, axis=0)):
            edge = p1 - p0
            t = np.clip(np.dot(x - p0, edge) / np.dot(edge, edge), 0.0, 1.0)
            cand = p0 + t * edge
            d = np.linalg.norm(x - cand)
            if d < bd:
                best, bd = cand, d
        return best

    def support(self, e):
        return float(np.max(self.vertices @ np.asarray(e, dtype=float)))

    def boundary_normal(self, x, tol):
        x = np.asarray(x, dtype=float)
        v = self.vertices
        nv = len(v)
        # vertex hit: angular-bisector normal of the two adjacent edges
        for i in range(nv):
            if np.linalg.norm(x - v[i]) <= tol:
                n_prev = _edge_normal(v[i - 1], v[i])
                n_next = _edge_normal(v[i], v[(i + 1) % nv])
                n = n_prev + n_next
                return n / np.linalg.norm(n)
        for p0, p1 in zip(v, np.roll(v, -1, axis=0)):
            edge = p1 - p0
            t = np.dot(x - p0, edge) / np.dot(edge, edge)
            if -1e-12 <= t <= 1 + 1e-12:
                cand = p0 + t * edge
                if np.linalg.norm(x - cand) <= tol:
                    return _edge_normal(p0, p1)
        raise GeometryError(f"point {x} is not within {tol} of the polygon boundary")


def _edge_normal(p0, p1):
    edge = np.asarray(p1, float) - np.asarray(p0, float)
    n = np.array([edge[1], -edge[0]])
    return n / np.linalg.norm(n)


def _signed_area2(verts):
    x, y = verts[:, 0], verts[:, 1]
    return float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _convex_chain(verts, tol=1e-12):
    a = verts
    b = np.roll(verts, -1, axis=0)
    c = np.roll(verts, -2, axis=0)
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - b[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - b[:, 0])
    return bool(np.all(cross >= -tol * np.max(np.abs(cross), initial=1.0)))


def _raycast_contains(verts, pts):
    inside = np.zeros(len(pts), dtype=bool)
    v0 = verts
    v1 = np.roll(verts, -1, axis=0)
    for x0, y0, x1, y1 in zip(v0[:, 0], v0[:, 1], v1[:, 0], v1[:, 1]):
        crosses = (y0 > pts[:, 1]) != (y1 > pts[:, 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x0 + (pts[:, 1] - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (pts[:, 0] < xint)
    # boundary points: snap via edge-distance test
    on_edge = np.zeros(len(pts), dtype=bool)
    for p0, p1 in zip(v0, v1):
        edge = p1 - p0
        ee = edge @ edge
        t = np.clip(((pts - p0) @ edge) / ee, 0.0, 1.0)
        d = np.linalg.norm(pts - (p0 + t[:, None] * edge), axis=1)
        on_edge |= d <= 1e-12
    return inside | on_edge


@dataclass(frozen=True)
class RasterMask(Obstacle):
    """Obstacle given by a boolean array over the box [-halfwidth, halfwidth]^2.

    Cell (iy, ix) is centered at (-L + (ix+0.5)h, -L + (iy+0.5)h) with
    h = 2L/n.  Membership of an arbitrary point is that of its covering cell.
    declared_convex is set by the hull test at construction.
    """

    mask: np.ndarray
    halfwidth: float
    declared_convex: bool = False

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise GeometryError("raster mask must be a square 2-D boolean array")
        object.__setattr__(self, "mask", m)
        if m.any():
            object.__setattr__(self, "declared_convex", _raster_hull_equal(self))

    @property
    def h(self) -> float:
        return 2.0 * self.halfwidth / self.mask.shape[0]

    def cell_points(self) -> np.ndarray:
        """Centers of the cells marked as obstacle, shape (m, 2)."""
        iy, ix = np.nonzero(self.mask)
        h, L = self.h, self.halfwidth
        return np.column_stack([-L + (ix + 0.5) * h, -L + (iy + 0.5) * h])

    def is_empty(self):
        return not self.mask.any()

    def contains_many(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = self.mask.shape[0]
        ix = np.floor((pts[:, 0] + self.halfwidth) / self.h).astype(int)
        iy = np.floor((pts[:, 1] + self.halfwidth) / self.h).astype(int)
        ok = (ix >= 0) & (ix < n) & (iy >= 0) & (iy < n)
        out = np.zeros(len(pts), dtype=bool)
        out[ok] = self.mask[iy[ok], ix[ok]]
        return out

    def bounding_box(self):
        pts = self.cell_points()
        if len(pts) == 0:
            return (0.0, 0.0, 0.0, 0.0)
        r = self.h / 2.0
        return (pts[:, 0].min() - r, pts[:, 0].max() + r,
                pts[:, 1].min() - r, pts[:, 1].max() + r)

    def project(self, x):
        pts = self.cell_points()
        if len(pts) == 0:
            raise GeometryError("cannot project onto an empty raster obstacle")
        x = np.asarray(x, dtype=float)
        return pts[np.argmin(np.linalg.norm(pts - x, axis=1))]

    def support(self, e):
        pts = self.cell_points()
        if len(pts) == 0:
            raise GeometryError("support of an empty raster obstacle")
        e = np.asarray(e, dtype=float)
        # cell extent adds half a diagonal step in the e direction
        return float(np.max(pts @ e)) + 0.5 * self.h * (abs(e[0]) + abs(e[1]))

    def boundary_normal(self, x, tol):
        raise GeometryError("boundary normals are not defined for raster obstacles")


def _raster_hull_equal(raster: RasterMask) -> bool:
    pts = raster.cell_points()
    if len(pts) <= 2:
        return True
    try:
        hull = ConvexHull(pts)
    except QhullError:
        return True  # degenerate (collinear) sets are convex
    poly = ConvexPolygon(pts[hull.vertices])
    centers = raster_all_centers(raster)
    inside = poly.contains_many(centers).reshape(raster.mask.shape)
    return bool(np.array_equal(inside, raster.mask))


def raster_all_centers(raster: RasterMask) -> np.ndarray:
    n = raster.mask.shape[0]
    h, L = raster.h, raster.halfwidth
    c = -L + (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(c, c, indexing="xy")
    return np.column_stack([X.ravel(), Y.ravel()])


def raster_from_pgm(path, halfwidth: float) -> RasterMask:
    """Raster obstacle from a PGM image; nonzero pixels mark K.

    The image rows are interpreted top-down, so row 0 of the file is the
    largest y.
    """
    from .outputs import read_pgm

    img = read_pgm(path)
    if img.shape[0] != img.shape[1]:
        raise GeometryError(f"{path}: obstacle PGM must be square")
    return RasterMask(np.flipud(img > 0), halfwidth)


# --- spec-level operations -------------------------------------------------

def contains(obstacle: Obstacle, x) -> bool:
    """True iff x lies in the closed set K."""
    return bool(obstacle.contains_many(np.asarray(x, dtype=float)[None, :])[0])


def outward_normal(obstacle: Obstacle, x, tol: float = ANALYTIC_BOUNDARY_TOL) -> np.ndarray:
    """Outward unit normal of K at a boundary point (within tol of it)."""
    return obstacle.boundary_normal(np.asarray(x, dtype=float), tol)


def is_convex(obstacle: Obstacle) -> bool:
    """Exact for analytic shapes; hull-rasterization equality for rasters."""
    return bool(obstacle.declared_convex)


def separating_halfspace(obstacle: Obstacle, x0) -> HalfSpace:
    """Supporting half-space through the exterior point x0 with K below it.

    The direction is from the Euclidean projection of x0 onto K toward x0,
    and the offset puts x0 on the boundary of the returned half-space.
    """
    x0 = np.asarray(x0, dtype=float)
    if not is_convex(obstacle):
        raise GeometryError("separating half-space requires a convex obstacle")
    if contains(obstacle, x0):
        raise GeometryError(f"point {x0} lies inside the obstacle")
    p = obstacle.project(x0)
    v = x0 - p
    nv = np.linalg.norm(v)
    if nv == 0.0:
        raise GeometryError(f"point {x0} lies on the obstacle boundary")
    e = v / nv
    return HalfSpace(e, float(np.dot(x0, e)))


def rasterize(obstacle: Obstacle, grid) -> np.ndarray:
    """Boolean array marking grid cells whose centers lie in K.

    ``grid`` provides halfwidth, n_cells and cell_centers(); the obstacle
    bounding box must fit inside the grid box.
    """
    if not obstacle.is_empty():
        xmin, xmax, ymin, ymax = obstacle.bounding_box()
        L = grid.halfwidth
        if xmin < -L or xmax > L or ymin < -L or ymax > L:
            raise GeometryError(
                f"obstacle bounding box [{xmin},{xmax}]x[{ymin},{ymax}] exceeds the grid box +-{L}")
    X, Y = grid.cell_centers()
    pts = np.column_stack([X.ravel(), Y.ravel()])
    return obstacle.contains_many(pts).reshape(X.shape)
