"""Symbolic checks of the manufactured fields used by the benchmarks."""

import numpy as np
import pytest
import sympy as sp

from pespec import problems

x, y = sp.symbols("x y", real=True)
PTS = np.array([[0.7, 1.3], [2.1, -0.4], [4.0, 1.9], [5.5, 0.2]])


def _lambdify(expr):
    f = sp.lambdify((x, y), expr, "numpy")
    return lambda p: np.broadcast_to(f(p[:, 0], p[:, 1]), (len(p),)).astype(float)


def _vec(exprs):
    fs = [_lambdify(e) for e in exprs]
    return lambda p: np.stack([f(p) for f in fs], axis=1)


def _stokes_pair(u1, u2, p):
    lap = [sp.diff(u, x, 2) + sp.diff(u, y, 2) for u in (u1, u2)]
    return [-lap[0] + sp.diff(p, x), -lap[1] + sp.diff(p, y)], lap


def test_torus_stokes_field():
    e = sp.exp(sp.sin(x))
    u1, u2, p = e * sp.cos(y), -e * sp.sin(y) * sp.cos(x), sp.exp(2 * sp.cos(x))
    assert sp.simplify(sp.diff(u1, x) + sp.diff(u2, y)) == 0
    forcing, _ = _stokes_pair(u1, u2, p)
    assert np.allclose(problems.stokes_exact_velocity(PTS), _vec([u1, u2])(PTS))
    assert np.allclose(problems.stokes_exact_pressure(PTS), _lambdify(p)(PTS))
    assert np.allclose(problems.stokes_exact_forcing(PTS), _vec(forcing)(PTS))
    grad = problems.stokes_exact_gradient(PTS)
    for i, u in enumerate((u1, u2)):
        for j, v in enumerate((x, y)):
            assert np.allclose(grad[:, i, j], _lambdify(sp.diff(u, v))(PTS))


def test_channel_field():
    e = sp.exp(sp.sin(x))
    u1, u2 = 4 * y * e * (y ** 2 - 4), -e * sp.cos(x) * (y ** 2 - 4) ** 2
    p = sp.exp(2 * sp.cos(x)) * sp.cos(y)
    assert sp.simplify(sp.diff(u1, x) + sp.diff(u2, y)) == 0
    _, lap = _stokes_pair(u1, u2, p)
    assert np.allclose(problems.channel_exact_velocity(PTS), _vec([u1, u2])(PTS))
    assert np.allclose(problems.channel_exact_laplacian(PTS), _vec(lap)(PTS))
    assert np.allclose(problems.channel_exact_pressure_gradient(PTS), _vec([sp.diff(p, x), sp.diff(p, y)])(PTS))
    grad = problems.channel_exact_gradient(PTS)
    for i, u in enumerate((u1, u2)):
        for j, v in enumerate((x, y)):
            assert np.allclose(grad[:, i, j], _lambdify(sp.diff(u, v))(PTS))
    walls = np.array([[1.0, 2.0], [3.0, -2.0]])
    assert np.allclose(problems.channel_exact_velocity(walls), 0.0)


def test_poisson_fields():
    pts = PTS + 1.5
    u = 1 / (x ** 2 + y ** 2)
    lap = sp.diff(u, x, 2) + sp.diff(u, y, 2)
    star = problems.poisson2d_star(16)
    assert np.allclose(star.forcing(pts), _lambdify(-lap)(pts))
    v = 1 / (x * y)
    mixed = problems.poisson2d_mixed(16)
    lap_v = sp.diff(v, x, 2) + sp.diff(v, y, 2)
    assert np.allclose(mixed.forcing(pts), _lambdify(-lap_v)(pts))
    n = np.tile([0.6, 0.8], (len(pts), 1))
    flux = 0.6 * _lambdify(sp.diff(v, x))(pts) + 0.8 * _lambdify(sp.diff(v, y))(pts)
    assert np.allclose(problems.inverse_product_flux(pts, n), flux)


def test_poisson1d_exact_solution():
    xs = np.linspace(2.0, 5.0, 7)[:, None]
    u = problems.poisson1d_exact(xs)
    assert u[0] == pytest.approx(1.0) and u[-1] == pytest.approx(-1.0)
    h = 1e-4
    d2 = (problems.poisson1d_exact(xs + h) - 2 * u + problems.poisson1d_exact(xs - h)) / h ** 2
    assert np.allclose(d2, 1.0 / xs[:, 0], rtol=1e-5)


def test_heat_forcing_consistent():
    t = sp.symbols("t")
    u = sp.log(x) * sp.cos(2 * sp.pi * t)
    f = sp.diff(u, t) - sp.diff(u, x, 2)
    prob = problems.heat1d(16)
    pts = np.array([[2.5], [4.2]])
    ref = sp.lambdify((t, x), f)(0.3, pts[:, 0])
    assert np.allclose(prob.forcing(0.3, pts), ref)


def test_ns_forcing_matches_exact_field():
    """e^t-grown fields: forcing = u_t - Delta u + grad p + (u.grad)u."""
    prob = problems.ns_torus(16, "exact")
    t = 0.4
    u = prob.exact_velocity(t, PTS)
    g = prob.exact_gradient(t, PTS)
    lin = np.exp(t) * (problems.stokes_exact_velocity(PTS) + problems.stokes_exact_forcing(PTS))
    assert np.allclose(prob.forcing(t, PTS), lin + np.einsum("nj,nij->ni", u, g))


def test_unknown_variants_rejected():
    with pytest.raises(ValueError):
        problems.stokes_torus(16, "nope")
    with pytest.raises(ValueError):
        problems.ns_channel(16, 12, "nope")
