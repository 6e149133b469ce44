"""Benchmark problems with manufactured or reference data.

Every builder returns a ready-to-solve problem object.  Exact solutions are
exposed where they are known so that errors can be measured directly; the
remaining problems are studied by successive refinement in ``Ne``.
"""

from __future__ import annotations

import numpy as np

from .elliptic import EllipticProblem
from .extension import ScalarOperator
from .geometry import (
    BCKind,
    Disc,
    Exterior,
    Intersection,
    Interval,
    PhysicalDomain,
    Rectangle,
    Star,
    build_torus_domain,
)

# ---------------------------------------------------------------------------
# 1D Poisson: u'' = 1/x on (2, 5), u(2) = 1, u(5) = -1

_C1 = (-2.0 - 5.0 * np.log(5.0) + 2.0 * np.log(2.0)) / 3.0
_C2 = 1.0 - 2.0 * np.log(2.0) - 2.0 * _C1


def poisson1d_exact(points):
    x = np.asarray(points, dtype=float).reshape(len(points), -1)[:, 0]
    return x * np.log(x) + _C1 * x + _C2


def poisson1d(N=2 ** 10):
    comp = build_torus_domain(1, N)
    dom = PhysicalDomain.build(comp, Interval(2.0, 5.0))
    return EllipticProblem(
        dom, ScalarOperator.second_derivative(),
        forcing=lambda p: 1.0 / p[:, 0],
        dirichlet=lambda p: np.where(p[:, 0] < 3.5, 1.0, -1.0),
        exact=poisson1d_exact, name="poisson1d")


# ---------------------------------------------------------------------------
# 2D Poisson on the star: -Delta u = -4/(x^2+y^2)^2, u = 1/(x^2+y^2)


def inverse_square(points):
    return 1.0 / np.sum(np.asarray(points) ** 2, axis=1)


def poisson2d_star(N=2 ** 8):
    comp = build_torus_domain(2, N)
    dom = PhysicalDomain.build(comp, Star())
    return EllipticProblem(
        dom, ScalarOperator.poisson(),
        forcing=lambda p: -4.0 / np.sum(p ** 2, axis=1) ** 2,
        dirichlet=inverse_square, exact=inverse_square, name="poisson2d_star")


# ---------------------------------------------------------------------------
# mixed Dirichlet/Neumann on B_2(pi, pi): u = 1/(xy)


def inverse_product(points):
    return 1.0 / (points[:, 0] * points[:, 1])


def inverse_product_flux(points, normals):
    x, y = points[:, 0], points[:, 1]
    return -(normals[:, 0] / (x * x * y) + normals[:, 1] / (x * y * y))


def upper_half(points, centre=np.pi):
    """Nodes strictly above the horizontal diameter; junction nodes stay Dirichlet."""
    return points[:, 1] > centre + 1e-12


def poisson2d_mixed(N=2 ** 8):
    comp = build_torus_domain(2, N)
    dom = PhysicalDomain.build(comp, Disc((np.pi, np.pi), 2.0), neumann_selector=upper_half)
    x_y = lambda p: p[:, 0] * p[:, 1]  # noqa: E731
    return EllipticProblem(
        dom, ScalarOperator.poisson(),
        forcing=lambda p: -2.0 / x_y(p) * (1.0 / p[:, 0] ** 2 + 1.0 / p[:, 1] ** 2),
        dirichlet=inverse_product, neumann=inverse_product_flux, exact=inverse_product,
        name="poisson2d_mixed")


# ---------------------------------------------------------------------------
# heat equations (forcing and exact solution as functions of t)


class HeatProblem:
    """``u_t - Delta u = f`` with exact solution ``u(t, x)`` on a torus-embedded domain."""

    def __init__(self, domain, exact, forcing, name=""):
        self.domain = domain
        self.exact = exact
        self.forcing = forcing
        self.name = name


def heat1d(N=2 ** 8):
    comp = build_torus_domain(1, N)
    dom = PhysicalDomain.build(comp, Interval(2.0, 5.0))

    def exact(t, p):
        return np.log(p[:, 0]) * np.cos(2 * np.pi * t)

    def forcing(t, p):
        x = p[:, 0]
        return -2 * np.pi * np.log(x) * np.sin(2 * np.pi * t) + np.cos(2 * np.pi * t) / x ** 2

    return HeatProblem(dom, exact, forcing, "heat1d")


def heat2d(N=2 ** 8):
    comp = build_torus_domain(2, N)
    dom = PhysicalDomain.build(comp, Disc((np.pi, np.pi), 2.0))

    def exact(t, p):
        return np.log(np.sum(p ** 2, axis=1)) * np.cos(2 * np.pi * t)

    def forcing(t, p):
        return -2 * np.pi * np.log(np.sum(p ** 2, axis=1)) * np.sin(2 * np.pi * t)

    return HeatProblem(dom, exact, forcing, "heat2d")


# ---------------------------------------------------------------------------
# torus fluid domain: square with walls at 0.6 and 2pi-0.6 minus the unit disc

WALL = 0.6


def torus_fluid_shape():
    lo, hi = WALL, 2 * np.pi - WALL
    return Intersection(Rectangle((lo, lo), (hi, hi)), Exterior(Disc((np.pi, np.pi), 1.0)))


def torus_fluid_domain(N):
    return PhysicalDomain.build(build_torus_domain(2, N), torus_fluid_shape())


def stokes_exact_velocity(points):
    x, y = points[:, 0], points[:, 1]
    e = np.exp(np.sin(x))
    return np.stack([e * np.cos(y), -e * np.sin(y) * np.cos(x)], axis=1)


def stokes_exact_pressure(points):
    return np.exp(2 * np.cos(points[:, 0]))


def stokes_exact_forcing(points):
    """``-Delta u + grad p`` for the exact pair above."""
    x, y = points[:, 0], points[:, 1]
    e = np.exp(np.sin(x))
    f1 = e * np.cos(y) * (1 + np.sin(x) - np.cos(x) ** 2) - 2 * np.sin(x) * np.exp(2 * np.cos(x))
    f2 = e * np.sin(y) * np.cos(x) * (np.cos(x) ** 2 - 3 * np.sin(x) - 2)
    return np.stack([f1, f2], axis=1)


def stokes_exact_gradient(points):
    """Velocity gradient ``G[:, i, j] = d u_i / d x_j`` of the exact field."""
    x, y = points[:, 0], points[:, 1]
    e = np.exp(np.sin(x))
    g = np.empty((len(x), 2, 2))
    g[:, 0, 0] = e * np.cos(x) * np.cos(y)
    g[:, 0, 1] = -e * np.sin(y)
    g[:, 1, 0] = -e * np.sin(y) * (np.cos(x) ** 2 - np.sin(x))
    g[:, 1, 1] = -e * np.cos(y) * np.cos(x)
    return g


def inflow_profile(points):
    """Velocity data with a sine-squared profile on the left and right walls, zero elsewhere."""
    x, y = points[:, 0], points[:, 1]
    lo, hi = WALL, 2 * np.pi - WALL
    on_side = (np.isclose(x, lo, atol=1e-9) | np.isclose(x, hi, atol=1e-9)) & (y >= lo - 1e-12) & (y <= hi + 1e-12)
    out = np.zeros((len(x), 2))
    out[on_side, 0] = np.sin(np.pi * (y[on_side] - lo) / (hi - lo)) ** 2
    return out


# ---------------------------------------------------------------------------
# channel exact Navier-Stokes field (time factor e^t)


def channel_exact_velocity(points):
    x, y = points[:, 0], points[:, 1]
    e = np.exp(np.sin(x))
    return np.stack([4 * y * e * (y ** 2 - 4), -e * np.cos(x) * (y ** 2 - 4) ** 2], axis=1)


def channel_exact_pressure(points):
    return np.exp(2 * np.cos(points[:, 0])) * np.cos(points[:, 1])


def channel_exact_gradient(points):
    x, y = points[:, 0], points[:, 1]
    e = np.exp(np.sin(x))
    w = y ** 2 - 4
    g = np.empty((len(x), 2, 2))
    g[:, 0, 0] = 4 * y * w * e * np.cos(x)
    g[:, 0, 1] = e * (12 * y ** 2 - 16)
    g[:, 1, 0] = -e * w ** 2 * (np.cos(x) ** 2 - np.sin(x))
    g[:, 1, 1] = -e * np.cos(x) * 4 * y * w
    return g


def channel_exact_laplacian(points):
    x, y = points[:, 0], points[:, 1]
    e = np.exp(np.sin(x))
    w = y ** 2 - 4
    exx = e * (np.cos(x) ** 2 - np.sin(x))
    lap1 = 4 * y * w * exx + e * 24 * y
    c3 = e * (np.cos(x) ** 3 - 3 * np.sin(x) * np.cos(x) - np.cos(x))
    lap2 = -(c3 * w ** 2 + e * np.cos(x) * (12 * y ** 2 - 16))
    return np.stack([lap1, lap2], axis=1)


def channel_exact_pressure_gradient(points):
    x, y = points[:, 0], points[:, 1]
    e2 = np.exp(2 * np.cos(x))
    return np.stack([-2 * np.sin(x) * e2 * np.cos(y), -e2 * np.sin(y)], axis=1)


# ---------------------------------------------------------------------------
# Stokes problem builders


def stokes_torus(N=2 ** 7, variant="exact"):
    """Torus Stokes problems: ``exact`` data, ``forced`` (same forcing, no-slip) or ``inflow``."""
    from .stokes import StokesProblem

    dom = torus_fluid_domain(N)
    zero = lambda p: np.zeros((len(p), 2))  # noqa: E731
    if variant == "exact":
        return StokesProblem(dom, stokes_exact_forcing, stokes_exact_velocity, None,
                             stokes_exact_velocity, stokes_exact_pressure, "stokes_torus_exact")
    if variant == "forced":
        return StokesProblem(dom, stokes_exact_forcing, zero, name="stokes_torus_forced")
    if variant == "inflow":
        return StokesProblem(dom, zero, inflow_profile, name="stokes_torus_inflow")
    raise ValueError(f"unknown torus Stokes variant {variant!r}")


def channel_obstacle_domain(Nx, Ny, period=2 * np.pi, x0=0.0, centre=(np.pi, 0.0), radius=1.0, spacing=None):
    from .geometry import build_channel_domain

    comp = build_channel_domain(Nx, Ny, period, -2.0, 2.0, x0)
    return PhysicalDomain.build(comp, Exterior(Disc(centre, radius)), spacing)


def stokes_channel(Nx=2 ** 7, Ny=96, q=1.0):
    from .stokes import StokesProblem

    zero = lambda p: np.zeros((len(p), 2))  # noqa: E731
    return StokesProblem(channel_obstacle_domain(Nx, Ny), zero, zero, q, name="stokes_channel")


def sphere_forcing(points):
    """Tangent forcing with components ``(f_theta, f_phi)``."""
    th, ph = points[:, 0], points[:, 1]
    f_phi = np.sin(ph) * np.cos(th) + np.cos(2 * ph) * np.sin(th)
    f_theta = -np.cos(ph) + np.sin(2 * ph) * np.sin(th) * np.cos(th)
    return np.stack([f_theta, f_phi], axis=1)


def stokes_sphere(Nphi=2 ** 6, Ntheta=72, height=0.8):
    from .geometry import SphericalCapComplement, build_sphere_domain
    from .stokes import StokesProblem

    comp = build_sphere_domain(Nphi, Ntheta)
    dom = PhysicalDomain.build(comp, SphericalCapComplement(height))
    zero = lambda p: np.zeros((len(p), 2))  # noqa: E731
    return StokesProblem(dom, sphere_forcing, zero, name="stokes_sphere")


# ---------------------------------------------------------------------------
# Navier-Stokes problems (exact fields carry the time factor e^t)


def _advection_of(velocity, gradient, points):
    return np.einsum("nj,nij->ni", velocity(points), gradient(points))


def _grown(field):
    return lambda t, p: np.exp(t) * field(p)


def ns_torus(N=2 ** 7, variant="exact"):
    """Navier-Stokes on the torus fluid domain starting from the exact field at ``t = 0``.

    Variants: ``exact`` (manufactured data), ``noslip`` (same forcing, zero
    boundary velocity) and ``inflow`` (no forcing, sine-squared inflow).
    """
    from .evolution import NavierStokesProblem

    dom = torus_fluid_domain(N)
    zero = lambda t, p: np.zeros((len(p), 2))  # noqa: E731

    def forcing(t, p):
        e = np.exp(t)
        return (e * (stokes_exact_velocity(p) + stokes_exact_forcing(p))
                + e * e * _advection_of(stokes_exact_velocity, stokes_exact_gradient, p))

    common = dict(initial_velocity=stokes_exact_velocity, initial_gradient=stokes_exact_gradient)
    if variant == "exact":
        return NavierStokesProblem(dom, forcing, _grown(stokes_exact_velocity), **common,
                                   exact_velocity=_grown(stokes_exact_velocity),
                                   exact_gradient=_grown(stokes_exact_gradient),
                                   exact_pressure=_grown(stokes_exact_pressure), name="ns_torus_exact")
    if variant == "noslip":
        return NavierStokesProblem(dom, forcing, zero, **common, name="ns_torus_noslip")
    if variant == "inflow":
        return NavierStokesProblem(dom, zero, lambda t, p: inflow_profile(p), **common, name="ns_torus_inflow")
    raise ValueError(f"unknown torus Navier-Stokes variant {variant!r}")


def ns_channel(Nx=64, Ny=72, variant="exact", q=1.0):
    """Navier-Stokes in the channel around the unit disc at ``(pi, 0)``.

    ``exact`` uses the manufactured field with matching obstacle data;
    ``flowrate`` has no forcing, no-slip on the obstacle and flow rate ``q``.
    Both start from the manufactured field at ``t = 0``.
    """
    from .evolution import NavierStokesProblem

    dom = channel_obstacle_domain(Nx, Ny)
    zero = lambda t, p: np.zeros((len(p), 2))  # noqa: E731

    def forcing(t, p):
        e = np.exp(t)
        linear = channel_exact_velocity(p) - channel_exact_laplacian(p) + channel_exact_pressure_gradient(p)
        return e * linear + e * e * _advection_of(channel_exact_velocity, channel_exact_gradient, p)

    common = dict(initial_velocity=channel_exact_velocity, initial_gradient=channel_exact_gradient)
    if variant == "exact":
        return NavierStokesProblem(dom, forcing, _grown(channel_exact_velocity), **common,
                                   exact_velocity=_grown(channel_exact_velocity),
                                   exact_gradient=_grown(channel_exact_gradient),
                                   exact_pressure=_grown(channel_exact_pressure), name="ns_channel_exact")
    if variant == "flowrate":
        return NavierStokesProblem(dom, zero, zero, **common, flow_rate=q, name="ns_channel_flowrate")
    raise ValueError(f"unknown channel Navier-Stokes variant {variant!r}")
