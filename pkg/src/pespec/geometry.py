"""Computational domains, embedded physical domains and boundary discretizations.

A :class:`ComputationalDomain` is the simple enclosing region (torus, periodic
channel or sphere) together with a tensor quadrature grid.  A :class:`Shape`
describes the physical region inside it: it answers membership queries for grid
nodes and produces :class:`BoundarySegment` objects carrying nodes, arc-length
weights and outward normals for the boundary terms of the least-squares
objective.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, optimize

from ._validation import check_int, check_points, check_positive

BOUNDARY_TOL = 1e-12


class DomainKind(enum.Enum):
    TORUS1D = "torus1d"
    TORUS2D = "torus2d"
    CHANNEL = "channel"
    SPHERE = "sphere"


class BCKind(enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    INTRINSIC = "intrinsic"
    FLOW_RATE = "flow_rate"


def _readonly(arr):
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """One-dimensional rule; ``degree`` is the polynomial exactness (None for periodic rules)."""

    nodes: np.ndarray
    weights: np.ndarray
    degree: int | None = None

    def integrate(self, f):
        return float(np.sum(self.weights * f(self.nodes)))


def trapezoid_rule(n, period=2 * np.pi, origin=0.0):
    """Equispaced periodic rule on ``[origin, origin + period)``."""
    h = period / n
    return QuadratureRule(_readonly(origin + h * np.arange(n)), _readonly(np.full(n, h)))


def gauss_legendre_rule(n, a, b):
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return QuadratureRule(_readonly(a + half * (x + 1)), _readonly(half * w), 2 * n - 1)


@dataclass(frozen=True, eq=False)
class ComputationalDomain:
    """Tensor-grid discretization of the enclosing domain.

    ``axes`` and ``axis_weights`` hold one array per coordinate.  Grid points
    are ordered with the last axis varying fastest.  For the sphere the
    coordinates are ``(theta, phi)`` and the weights carry the ``sin(theta)``
    surface factor.
    """

    kind: DomainKind
    axes: tuple
    axis_weights: tuple
    bounds: tuple
    periodic: tuple
    radius: float = 1.0

    @property
    def ndim(self):
        return len(self.axes)

    @property
    def shape(self):
        return tuple(len(a) for a in self.axes)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def spacing(self):
        """Node spacing of the first (uniform) axis."""
        return float(self.axis_weights[0][0]) if self.kind is not DomainKind.SPHERE else float(
            self.axis_weights[1][0])

    @cached_property
    def points(self):
        grids = np.meshgrid(*self.axes, indexing="ij")
        return _readonly(np.stack([g.ravel() for g in grids], axis=1))

    @cached_property
    def weights(self):
        w = self.axis_weights[0]
        for wk in self.axis_weights[1:]:
            w = np.multiply.outer(w, wk)
        return _readonly(np.ravel(w))

    @property
    def measure(self):
        return float(self.weights.sum())


def build_torus_domain(dims, N):
    """Equispaced periodic grid on ``[0, 2*pi)**dims``."""
    if dims not in (1, 2):
        raise ValueError(f"dims must be 1 or 2, got {dims}")
    N = check_int(N, "N", minimum=4, even=True)
    rule = trapezoid_rule(N)
    kind = DomainKind.TORUS1D if dims == 1 else DomainKind.TORUS2D
    return ComputationalDomain(
        kind,
        (rule.nodes,) * dims,
        (rule.weights,) * dims,
        ((0.0, 2 * np.pi),) * dims,
        (True,) * dims,
    )


def build_channel_domain(Nx, Ny, x_period=2 * np.pi, y_lo=-2.0, y_hi=2.0, x0=0.0):
    """Periodic-in-x channel: trapezoid nodes in x, Gauss-Legendre nodes in y."""
    Nx = check_int(Nx, "Nx", minimum=4, even=True)
    Ny = check_int(Ny, "Ny", minimum=2)
    x_period = check_positive(x_period, "x_period")
    if not y_lo < y_hi:
        raise ValueError(f"invalid channel interval [{y_lo}, {y_hi}]")
    xr = trapezoid_rule(Nx, x_period, x0)
    yr = gauss_legendre_rule(Ny, y_lo, y_hi)
    return ComputationalDomain(
        DomainKind.CHANNEL,
        (xr.nodes, yr.nodes),
        (xr.weights, yr.weights),
        ((x0, x0 + x_period), (float(y_lo), float(y_hi))),
        (True, False),
    )


def build_sphere_domain(Nphi, Ntheta, radius=1.0):
    """Gauss-Legendre in theta on [0, pi] times a uniform azimuthal grid.

    Weights are for the unit-sphere measure, so they sum to ``4*pi`` whatever
    the radius.
    """
    Nphi = check_int(Nphi, "Nphi", minimum=4, even=True)
    Ntheta = check_int(Ntheta, "Ntheta", minimum=2)
    radius = check_positive(radius, "radius")
    th = gauss_legendre_rule(Ntheta, 0.0, np.pi)
    ph = trapezoid_rule(Nphi)
    return ComputationalDomain(
        DomainKind.SPHERE,
        (th.nodes, ph.nodes),
        (_readonly(np.sin(th.nodes) * th.weights), ph.weights),
        ((0.0, np.pi), (0.0, 2 * np.pi)),
        (False, True),
        radius,
    )


@dataclass(frozen=True, eq=False)
class BoundarySegment:
    nodes: np.ndarray
    weights: np.ndarray
    normals: np.ndarray
    kind: BCKind = BCKind.DIRICHLET
    closed: bool = True
    name: str = ""

    def __post_init__(self):
        for name in ("nodes", "weights", "normals"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        if self.nodes.shape[0] != self.weights.shape[0] or self.normals.shape != self.nodes.shape:
            raise ValueError("inconsistent boundary segment arrays")
        if np.any(self.weights <= 0):
            raise ValueError("boundary weights must be positive")

    def __len__(self):
        return self.nodes.shape[0]

    @property
    def length(self):
        return float(self.weights.sum())

    def subset(self, mask, kind=None, name=None):
        mask = np.asarray(mask, dtype=bool)
        return BoundarySegment(
            self.nodes[mask], self.weights[mask], self.normals[mask],
            self.kind if kind is None else kind, False,
            self.name if name is None else name,
        )

    def flipped(self):
        return BoundarySegment(self.nodes, self.weights, -self.normals, self.kind, self.closed, self.name)


def split_segment(segment, selector, kind):
    """Split ``segment`` into (unselected, selected) parts; the selected part gets ``kind``."""
    mask = np.asarray(selector(segment.nodes), dtype=bool)
    return segment.subset(~mask), segment.subset(mask, kind=kind, name=f"{segment.name}:{kind.value}")


# ---------------------------------------------------------------------------
# curves


class ClosedCurve:
    """Closed planar curve ``t -> point(t)``, ``t`` in ``[0, 2*pi)``, counter-clockwise."""

    def point(self, t):
        raise NotImplementedError

    def derivative(self, t):
        raise NotImplementedError

    def speed(self, t):
        return np.hypot(*self.derivative(np.atleast_1d(t)).T)

    def _arc(self, t0, t1):
        val, _ = integrate.quad(lambda s: float(self.speed(s)[0]), t0, t1,
                                epsabs=1e-14, epsrel=1e-13, limit=200)
        return val

    @cached_property
    def length(self):
        return self._arc(0.0, 2 * np.pi)

    def parameters_at_arclength(self, n):
        """Parameters of ``n`` nodes equispaced in arc length, starting at t = 0.

        Cumulative arc length comes from adaptive quadrature of the speed; each
        node is located by bracketed root finding from the previous one.
        """
        L = self.length
        ds = L / n
        ts = np.zeros(n)
        t_prev = 0.0
        vmax = float(np.max(self.speed(np.linspace(0, 2 * np.pi, 2049))))
        for i in range(1, n):
            hi = min(2 * np.pi, t_prev + 4 * np.pi / n + 2 * ds / max(vmax, 1e-300) * 8)
            g = lambda t: self._arc(t_prev, t) - ds  # noqa: E731
            while g(hi) < 0 and hi < 2 * np.pi:
                hi = min(2 * np.pi, hi + 2 * np.pi / n)
            ts[i] = optimize.brentq(g, t_prev, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            t_prev = ts[i]
        return ts


class Circle(ClosedCurve):
    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float)
        self.radius = check_positive(radius, "radius")

    def point(self, t):
        t = np.atleast_1d(t)
        return self.center + self.radius * np.stack([np.cos(t), np.sin(t)], axis=1)

    def derivative(self, t):
        t = np.atleast_1d(t)
        return self.radius * np.stack([-np.sin(t), np.cos(t)], axis=1)

    @property
    def length(self):
        return 2 * np.pi * self.radius

    def parameters_at_arclength(self, n):
        return 2 * np.pi * np.arange(n) / n


class StarCurve(ClosedCurve):
    """Polar curve ``r(t) = r0 + amp * cos(lobes * t)`` about ``center``."""

    def __init__(self, center, r0=1.5, amp=0.35, lobes=5):
        self.center = np.asarray(center, dtype=float)
        self.r0, self.amp, self.lobes = float(r0), float(amp), int(lobes)

    def radius_at(self, t):
        return self.r0 + self.amp * np.cos(self.lobes * t)

    def point(self, t):
        t = np.atleast_1d(t)
        r = self.radius_at(t)
        return self.center + np.stack([r * np.cos(t), r * np.sin(t)], axis=1)

    def derivative(self, t):
        t = np.atleast_1d(t)
        r = self.radius_at(t)
        dr = -self.amp * self.lobes * np.sin(self.lobes * t)
        return np.stack([dr * np.cos(t) - r * np.sin(t), dr * np.sin(t) + r * np.cos(t)], axis=1)


class Polygon(ClosedCurve):
    """Closed polyline through counter-clockwise ``vertices``; parameter is arc length scaled to 2*pi."""

    def __init__(self, vertices):
        self.vertices = np.asarray(vertices, dtype=float)
        edges = np.roll(self.vertices, -1, axis=0) - self.vertices
        self._edges = edges
        self._lengths = np.hypot(edges[:, 0], edges[:, 1])
        self._cum = np.concatenate([[0.0], np.cumsum(self._lengths)])

    @property
    def length(self):
        return float(self._cum[-1])

    def _locate(self, t):
        s = np.mod(np.atleast_1d(t), 2 * np.pi) * self.length / (2 * np.pi)
        k = np.clip(np.searchsorted(self._cum, s, side="right") - 1, 0, len(self._lengths) - 1)
        return s, k

    def point(self, t):
        s, k = self._locate(t)
        frac = (s - self._cum[k]) / self._lengths[k]
        return self.vertices[k] + frac[:, None] * self._edges[k]

    def derivative(self, t):
        _, k = self._locate(t)
        return self._edges[k] / self._lengths[k][:, None] * self.length / (2 * np.pi)

    def parameters_at_arclength(self, n):
        return 2 * np.pi * np.arange(n) / n


def discretize_boundary(curve, spacing, kind=BCKind.DIRICHLET, name=""):
    """Place ``round(L / spacing)`` nodes equidistant in arc length on a closed curve.

    Every node gets weight ``L / n_b`` (trapezoid rule on a closed loop) and the
    outward normal of the region the counter-clockwise curve encloses.
    """
    spacing = check_positive(spacing, "spacing")
    L = curve.length
    if not L > 0:
        raise ValueError("curve has zero length")
    n = max(int(round(L / spacing)), 3)
    t = curve.parameters_at_arclength(n)
    pts = curve.point(t)
    d = curve.derivative(t)
    d = d / np.hypot(d[:, 0], d[:, 1])[:, None]
    normals = np.stack([d[:, 1], -d[:, 0]], axis=1)
    return BoundarySegment(pts, np.full(n, L / n), normals, kind, True, name)


# ---------------------------------------------------------------------------
# shapes


class Shape:
    """Physical region: membership test plus boundary discretization."""

    ndim = 2

    def contains(self, points, tol=BOUNDARY_TOL):
        """True for points at least ``tol`` inside the region (negative ``tol`` grows it)."""
        raise NotImplementedError

    def boundary(self, spacing, kind=BCKind.DIRICHLET):
        raise NotImplementedError

    def __call__(self, points):
        return self.contains(points)


class Interval(Shape):
    ndim = 1

    def __init__(self, a, b):
        if not a < b:
            raise ValueError("interval requires a < b")
        self.a, self.b = float(a), float(b)

    def contains(self, points, tol=BOUNDARY_TOL):
        x = check_points(points, 1)[:, 0]
        return (x > self.a + tol) & (x < self.b - tol)

    def boundary(self, spacing=None, kind=BCKind.DIRICHLET):
        # point boundary: counting measure
        return [BoundarySegment(np.array([[self.a], [self.b]]), np.ones(2),
                                np.array([[-1.0], [1.0]]), kind, False, "endpoints")]


class Disc(Shape):
    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float)
        self.radius = check_positive(radius, "radius")
        self.curve = Circle(self.center, self.radius)

    def contains(self, points, tol=BOUNDARY_TOL):
        p = check_points(points, 2) - self.center
        return np.hypot(p[:, 0], p[:, 1]) < self.radius - tol

    def boundary(self, spacing, kind=BCKind.DIRICHLET):
        return [discretize_boundary(self.curve, spacing, kind, "circle")]


class Star(Shape):
    def __init__(self, center=(np.pi, np.pi), r0=1.5, amp=0.35, lobes=5):
        self.curve = StarCurve(center, r0, amp, lobes)
        self.center = self.curve.center

    def contains(self, points, tol=BOUNDARY_TOL):
        p = check_points(points, 2) - self.center
        r = np.hypot(p[:, 0], p[:, 1])
        return r < self.curve.radius_at(np.arctan2(p[:, 1], p[:, 0])) - tol

    def boundary(self, spacing, kind=BCKind.DIRICHLET):
        return [discretize_boundary(self.curve, spacing, kind, "star")]


class Rectangle(Shape):
    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        (x0, y0), (x1, y1) = self.lo, self.hi
        self.curve = Polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])

    def contains(self, points, tol=BOUNDARY_TOL):
        p = check_points(points, 2)
        return np.all((p > self.lo + tol) & (p < self.hi - tol), axis=1)

    def boundary(self, spacing, kind=BCKind.DIRICHLET):
        return [discretize_boundary(self.curve, spacing, kind, "rectangle")]


class Exterior(Shape):
    """Complement of ``inner``; its boundary normals point into ``inner``."""

    def __init__(self, inner):
        self.inner = inner
        self.ndim = inner.ndim

    def contains(self, points, tol=BOUNDARY_TOL):
        return ~self.inner.contains(points, -tol)

    def boundary(self, spacing, kind=BCKind.DIRICHLET):
        return [seg.flipped() for seg in self.inner.boundary(spacing, kind)]


class Intersection(Shape):
    """Intersection of shapes whose boundaries do not cross."""

    def __init__(self, *shapes):
        self.shapes = shapes
        self.ndim = shapes[0].ndim

    def contains(self, points, tol=BOUNDARY_TOL):
        out = self.shapes[0].contains(points, tol)
        for s in self.shapes[1:]:
            out &= s.contains(points, tol)
        return out

    def boundary(self, spacing, kind=BCKind.DIRICHLET):
        return [seg for s in self.shapes for seg in s.boundary(spacing, kind)]


class Everything(Shape):
    def __init__(self, ndim=2):
        self.ndim = ndim

    def contains(self, points, tol=BOUNDARY_TOL):
        return np.ones(check_points(points, self.ndim).shape[0], dtype=bool)

    def boundary(self, spacing, kind=BCKind.DIRICHLET):
        return []


def sphere_to_cartesian(points):
    th, ph = check_points(points, 2).T
    return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=1)


def sphere_frame(points):
    """Unit vectors (theta-hat, phi-hat) in Cartesian components at (theta, phi) points."""
    th, ph = check_points(points, 2).T
    e_th = np.stack([np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)], axis=1)
    e_ph = np.stack([-np.sin(ph), np.cos(ph), np.zeros_like(ph)], axis=1)
    return e_th, e_ph


class SphericalCapComplement(Shape):
    """Unit sphere minus the cap ``x . axis >= height`` in (theta, phi) coordinates."""

    def __init__(self, height=0.8, axis=(0.0, 1.0, 0.0)):
        if not -1 < height < 1:
            raise ValueError("cap height must lie in (-1, 1)")
        self.height = float(height)
        self.axis = np.asarray(axis, dtype=float) / np.linalg.norm(axis)

    def contains(self, points, tol=BOUNDARY_TOL):
        return sphere_to_cartesian(points) @ self.axis < self.height - tol

    @property
    def circle_radius(self):
        return float(np.sqrt(1 - self.height ** 2))

    def boundary(self, spacing, kind=BCKind.DIRICHLET):
        rc = self.circle_radius
        L = 2 * np.pi * rc
        n = max(int(round(L / check_positive(spacing, "spacing"))), 3)
        t = 2 * np.pi * np.arange(n) / n
        a = self.axis
        e1 = np.cross(a, [0.0, 0.0, 1.0])
        if np.linalg.norm(e1) < 1e-8:
            e1 = np.cross(a, [1.0, 0.0, 0.0])
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(a, e1)
        xyz = self.height * a + rc * (np.cos(t)[:, None] * e1 + np.sin(t)[:, None] * e2)
        theta = np.arccos(np.clip(xyz[:, 2], -1, 1))
        phi = np.mod(np.arctan2(xyz[:, 1], xyz[:, 0]), 2 * np.pi)
        pts = np.stack([theta, phi], axis=1)
        conormal = a - (xyz @ a)[:, None] * xyz
        conormal /= np.linalg.norm(conormal, axis=1)[:, None]
        e_th, e_ph = sphere_frame(pts)
        normals = np.stack([np.sum(conormal * e_th, 1), np.sum(conormal * e_ph, 1)], axis=1)
        return [BoundarySegment(pts, np.full(n, L / n), normals, kind, True, "cap-edge")]


def classify_interior(domain, indicator, tol=BOUNDARY_TOL):
    """Sorted flat indices of grid nodes strictly inside the indicator region."""
    if isinstance(indicator, Shape):
        mask = indicator.contains(domain.points, tol)
    else:
        mask = np.asarray(indicator(domain.points), dtype=bool)
    return np.flatnonzero(mask)


@dataclass(frozen=True, eq=False)
class PhysicalDomain:
    """Embedded region: interior grid nodes plus discretized boundary segments."""

    computational: ComputationalDomain
    shape: Shape
    interior: np.ndarray
    boundary: tuple = field(default_factory=tuple)

    @classmethod
    def build(cls, computational, shape, spacing=None, kind=BCKind.DIRICHLET, neumann_selector=None):
        """Classify interior nodes and discretize the boundary at ``spacing`` (default: grid spacing)."""
        spacing = computational.spacing if spacing is None else spacing
        segments = list(shape.boundary(spacing, kind))
        if neumann_selector is not None:
            split = []
            for seg in segments:
                rest, sel = split_segment(seg, neumann_selector, BCKind.NEUMANN)
                split.extend(s for s in (rest, sel) if len(s))
            segments = split
        interior = classify_interior(computational, shape)
        interior.setflags(write=False)
        return cls(computational, shape, interior, tuple(segments))

    @property
    def interior_points(self):
        return self.computational.points[self.interior]

    @property
    def interior_weights(self):
        return self.computational.weights[self.interior]

    @property
    def n_boundary(self):
        return sum(len(s) for s in self.boundary)

    def boundary_nodes(self, kind=None):
        segs = [s for s in self.boundary if kind is None or s.kind is kind]
        if not segs:
            return np.zeros((0, self.computational.ndim))
        return np.concatenate([s.nodes for s in segs])
