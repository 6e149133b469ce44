import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pespec.geometry import (
    BCKind,
    Circle,
    Disc,
    Everything,
    Exterior,
    Interval,
    PhysicalDomain,
    StarCurve,
    build_channel_domain,
    build_sphere_domain,
    build_torus_domain,
    discretize_boundary,
    gauss_legendre_rule,
    trapezoid_rule,
)


def test_trapezoid_integrates_trig_polynomials_exactly():
    rule = trapezoid_rule(16)
    assert rule.integrate(lambda x: np.cos(3 * x) ** 2) == pytest.approx(np.pi, abs=1e-13)


def test_gauss_legendre_degree():
    rule = gauss_legendre_rule(5, -1.0, 3.0)
    assert rule.degree == 9
    assert rule.integrate(lambda x: x ** 9) == pytest.approx((3.0 ** 10 - 1.0) / 10, rel=1e-13)


def test_torus_grid_ordering_and_measure():
    dom = build_torus_domain(2, 8)
    assert dom.shape == (8, 8)
    assert dom.measure == pytest.approx(4 * np.pi ** 2)
    # last axis varies fastest
    assert dom.points[1, 0] == 0.0 and dom.points[1, 1] > 0


def test_channel_and_sphere_measures():
    ch = build_channel_domain(16, 12, 2 * np.pi, -2.0, 2.0)
    assert ch.measure == pytest.approx(8 * np.pi)
    sp = build_sphere_domain(16, 12)
    assert sp.measure == pytest.approx(4 * np.pi, rel=1e-12)


@pytest.mark.parametrize("bad", [3, 7, 0])
def test_torus_rejects_odd_or_small_grids(bad):
    with pytest.raises(ValueError):
        build_torus_domain(2, bad)


def test_circle_boundary_nodes_and_normals():
    seg = discretize_boundary(Circle((1.0, 2.0), 0.5), 0.05)
    r = seg.nodes - np.array([1.0, 2.0])
    assert np.allclose(np.hypot(*r.T), 0.5)
    assert np.allclose(seg.normals, r / 0.5)
    assert seg.length == pytest.approx(np.pi)


def test_star_arclength_equispaced():
    curve = StarCurve((0.0, 0.0))
    seg = discretize_boundary(curve, 0.1)
    t = curve.parameters_at_arclength(len(seg))
    arcs = [curve._arc(a, b) for a, b in zip(t, np.append(t[1:], 2 * np.pi))]
    assert np.allclose(arcs, curve.length / len(seg), rtol=1e-9)
    assert seg.length == pytest.approx(curve.length, rel=1e-12)


@given(st.floats(0.3, 1.2), st.floats(2.0, 4.0), st.floats(2.0, 4.0))
def test_disc_boundary_length_property(radius, cx, cy):
    seg = discretize_boundary(Circle((cx, cy), radius), 0.07)
    assert seg.length == pytest.approx(2 * np.pi * radius, rel=1e-12)
    assert np.all(seg.weights > 0)


def test_exterior_flips_normals_and_classification():
    comp = build_torus_domain(2, 32)
    dom = PhysicalDomain.build(comp, Exterior(Disc((np.pi, np.pi), 1.0)))
    pts = dom.interior_points
    assert np.all(np.hypot(pts[:, 0] - np.pi, pts[:, 1] - np.pi) > 1.0)
    seg = dom.boundary[0]
    outward_from_fluid = (np.array([np.pi, np.pi]) - seg.nodes)
    assert np.all(np.einsum("ij,ij->i", seg.normals, outward_from_fluid) > 0)


def test_interval_domain_has_two_point_boundary():
    dom = PhysicalDomain.build(build_torus_domain(1, 64), Interval(2.0, 5.0))
    assert dom.n_boundary == 2
    assert np.all((dom.interior_points > 2.0) & (dom.interior_points < 5.0))


def test_everything_has_no_boundary():
    dom = PhysicalDomain.build(build_torus_domain(2, 8), Everything())
    assert dom.n_boundary == 0
    assert len(dom.interior_points) == 64


def test_neumann_selector_splits_segments():
    dom = PhysicalDomain.build(build_torus_domain(2, 32), Disc((np.pi, np.pi), 2.0),
                               neumann_selector=lambda p: p[:, 1] > np.pi)
    kinds = {s.kind for s in dom.boundary}
    assert kinds == {BCKind.DIRICHLET, BCKind.NEUMANN}
    assert sum(len(s) for s in dom.boundary) == dom.n_boundary
