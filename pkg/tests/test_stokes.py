import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _oracles import N_DENSE, dense_periodic_stokes
from pespec import problems
from pespec.extension import RankDeficiencyError
from pespec.geometry import Everything, PhysicalDomain, build_torus_domain
from pespec.stokes import (
    ChannelStokesSolver,
    SphereStokesSolver,
    StokesProblem,
    TorusStokesSolver,
    interleave,
    pressure_normalize,
)

MODES = [((1, 0), 0), ((2, -1), 1), ((1, 3), 0), ((-2, 2), 1)]


@pytest.mark.parametrize("j,l", MODES)
@pytest.mark.parametrize("mass,sigma,pscale", [(0.0, 1.0, 1.0), (1.0, 0.3, 0.3)])
def test_periodic_mode_solve_matches_dense_grid_solve(j, l, mass, sigma, pscale):
    dom = build_torus_domain(2, N_DENSE)
    pts = dom.points
    f = np.zeros((len(pts), 2))
    f[:, l] = np.cos(pts @ np.array(j, dtype=float))
    u1, u2, p = dense_periodic_stokes(f, mass, sigma, pscale)
    uh, ph = TorusStokesSolver.periodic_mode_solve(j, l, mass, sigma, pscale)
    phase = np.exp(1j * (pts @ np.array(j, dtype=float)))
    assert np.max(np.abs((uh[0] * phase).real - u1)) < 1e-8
    assert np.max(np.abs((uh[1] * phase).real - u2)) < 1e-8
    assert np.max(np.abs((ph * phase).real - p)) < 1e-8


def test_torus_solver_without_boundary_needs_mass():
    """With no boundary rows nothing fixes the constant velocity of the steady problem."""
    dom = PhysicalDomain.build(build_torus_domain(2, N_DENSE), Everything())
    with pytest.raises(RankDeficiencyError):
        TorusStokesSolver(4).build(dom)


@pytest.mark.parametrize("mass,sigma", [(1.0, 1.0), (2.0, 0.5)])
def test_torus_solver_without_boundary_matches_dense_solve(mass, sigma):
    dom = PhysicalDomain.build(build_torus_domain(2, N_DENSE), Everything())
    pts = dom.interior_points
    f = np.stack([np.sin(pts[:, 0] + 2 * pts[:, 1]), np.cos(3 * pts[:, 0])], axis=1)
    solver = TorusStokesSolver(5, mass=mass, sigma=sigma)
    solver.build(dom)
    sol = pressure_normalize(solver.solve(f, np.zeros((0, 2))), dom)
    u1, u2, p = dense_periodic_stokes(f, mass, sigma, 1.0)
    u = sol.velocity(pts)
    assert np.max(np.abs(u[:, 0] - u1)) < 1e-8
    assert np.max(np.abs(u[:, 1] - u2)) < 1e-8
    assert np.max(np.abs(sol.pressure(pts) - p)) < 1e-8


def test_zero_mode_has_no_periodic_response():
    with pytest.raises(ValueError):
        TorusStokesSolver.periodic_mode_solve((0, 0), 0)


@given(st.integers(-4, 4), st.integers(-4, 4), st.integers(0, 1))
def test_mode_response_is_divergence_free(j1, j2, l):
    if j1 == 0 and j2 == 0:
        return
    uh, _ = TorusStokesSolver.periodic_mode_solve((j1, j2), l)
    assert abs(j1 * uh[0] + j2 * uh[1]) < 1e-14


def test_interleave_layout():
    out = interleave(np.array([1.0, 2.0]), np.array([10.0, 20.0]))
    assert out.tolist() == [1.0, 10.0, 2.0, 20.0]


def test_torus_exact_solution_small_grid():
    prob = problems.stokes_torus(64, "exact")
    solver = TorusStokesSolver(14).fit(prob)
    sol = pressure_normalize(solver.solution_, prob.domain)
    pts = prob.domain.interior_points
    err = np.abs(sol.velocity(pts) - prob.exact_velocity(pts)).max()
    assert err < 1e-6
    assert np.abs(sol.divergence(pts)).max() < 1e-10


def test_channel_flow_rate_and_walls():
    prob = problems.stokes_channel(96, 64)
    solver = ChannelStokesSolver(24, flow_rate=True).fit(prob)
    sol = solver.solution_
    assert solver.flow_rate_of(sol) == pytest.approx(1.0, abs=1e-3)
    assert np.abs(sol.velocity(solver.boundary_nodes_)).max() < 1e-2
    walls = np.array([[0.5, -2.0], [2.0, 2.0], [4.0, -2.0]])
    assert np.allclose(sol.velocity(walls), 0.0, atol=1e-12)
    pts = prob.domain.interior_points
    assert np.abs(sol.divergence(pts)).max() < 1e-9
    assert sol.alpha > 0


def test_channel_flow_weight_tightens_flow_rate():
    prob = problems.stokes_channel(64, 48)
    loose = ChannelStokesSolver(10, flow_rate=True).fit(prob)
    tight = ChannelStokesSolver(10, flow_rate=True, flow_weight=1e4).fit(prob)
    assert abs(tight.flow_rate_of(tight.solution_) - 1) <= abs(loose.flow_rate_of(loose.solution_) - 1) + 1e-12


def test_sphere_boundary_error_decreases_with_cutoff():
    prob = problems.stokes_sphere(32, 36)
    errs = []
    for ne in (10, 14, 18):
        solver = SphereStokesSolver(ne).fit(prob)
        errs.append(np.abs(solver.solution_.velocity(solver.boundary_nodes_)).max())
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


def test_zero_data_zero_solution():
    prob = problems.stokes_torus(32, "forced")
    solver = TorusStokesSolver(6).build(prob.domain)
    sol = solver.solve(np.zeros((len(prob.domain.interior), 2)), np.zeros((len(solver.boundary_nodes_), 2)))
    assert np.allclose(sol.velocity_coefs, 0) and np.allclose(sol.pressure_coefs, 0)


def test_problem_container_defaults():
    p = StokesProblem(None, None, None)
    assert p.flow_rate is None and p.exact_velocity is None
