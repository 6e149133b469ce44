import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pespec.evolution import SolverFailure
from pespec.viscoelastic import (
    OldroydBChannelSolver,
    OldroydBParams,
    compute_antisymmetric_a,
    components,
    disc_quadrature,
    evolution_rhs,
    inverse_2x2,
    newtonian_drag,
    polymer_stress,
    symmetric_eigenvalues,
    symmetric_from_components,
)

finite = st.floats(-2, 2, allow_nan=False)


def _spd(rng, n):
    m = rng.standard_normal((n, 2, 2))
    return m @ np.swapaxes(m, 1, 2) + 0.5 * np.eye(2)


def test_params_derived_quantities():
    p = OldroydBParams()
    assert p.lam == pytest.approx(0.1)
    assert p.xi == pytest.approx(0.41 / (0.59 * 0.1))
    with pytest.raises(ValueError):
        OldroydBParams(Wi=0.0)


@given(arrays(float, (5, 3), elements=finite))
def test_component_round_trip(c):
    b = symmetric_from_components(c)
    assert np.array_equal(b, np.swapaxes(b, 1, 2))
    assert np.array_equal(components(b), c)


def test_inverse_and_eigenvalues_match_numpy():
    b = _spd(np.random.default_rng(1), 20)
    assert np.allclose(inverse_2x2(b), np.linalg.inv(b), atol=1e-12)
    lo, hi = symmetric_eigenvalues(b)
    ref = np.linalg.eigvalsh(b)
    assert np.allclose(lo, ref[:, 0]) and np.allclose(hi, ref[:, 1])
    with pytest.raises(SolverFailure):
        inverse_2x2(np.zeros((1, 2, 2)))


@given(st.integers(0, 10_000))
def test_antisymmetric_a_symmetrizes(seed):
    rng = np.random.default_rng(seed)
    b = _spd(rng, 4)
    g = rng.standard_normal((4, 2, 2))
    a = compute_antisymmetric_a(b, g)
    assert np.allclose(a, -np.swapaxes(a, 1, 2))
    m = b @ np.swapaxes(g, 1, 2) + a @ b
    assert np.allclose(m, np.swapaxes(m, 1, 2), atol=1e-10)


def test_degenerate_trace_raises_with_location():
    b = np.zeros((1, 2, 2))
    with pytest.raises(SolverFailure, match="degenerate"):
        compute_antisymmetric_a(b, np.zeros((1, 2, 2)), where=np.array([[0.5, 1.5]]))


def test_identity_at_rest_is_stationary():
    n = 3
    b = np.broadcast_to(np.eye(2), (n, 2, 2)).copy()
    rate = evolution_rhs(b, np.zeros((n, 2, 2, 2)), np.zeros((n, 2)), np.zeros((n, 2, 2)), 0.1)
    assert np.max(np.abs(rate)) == 0.0
    assert np.max(np.abs(polymer_stress(b, OldroydBParams()))) == 0.0


def test_relaxation_towards_identity():
    b = np.broadcast_to(2.0 * np.eye(2), (1, 2, 2)).copy()
    rate = evolution_rhs(b, np.zeros((1, 2, 2, 2)), np.zeros((1, 2)), np.zeros((1, 2, 2)), 0.5)
    assert np.allclose(rate[0], (0.5 - 2.0) * np.eye(2))


@pytest.mark.parametrize("r", [1.0, 0.5])
def test_disc_quadrature_integrates_polynomials(r):
    pts, w = disc_quadrature(64, 16, r)
    assert w.sum() == pytest.approx(np.pi * r ** 2, rel=1e-13)
    assert np.sum(w * pts[:, 0] ** 2) == pytest.approx(np.pi * r ** 4 / 4, rel=1e-12)


def test_newtonian_drag_boundary_matches_bulk():
    cb, cv, model, state = newtonian_drag()
    assert cb > 0
    assert cb == pytest.approx(cv, rel=1e-6)


@pytest.fixture(scope="module")
def short_run():
    model = OldroydBChannelSolver(dt=5e-3, T=0.05, record_every=5)
    return model.fit()


def test_short_run_diagnostics(short_run):
    run = short_run.run_
    assert run.factorizations_in_loop == 0
    assert run.t[-1] == pytest.approx(0.05)
    assert max(run.flowrate_error) < 1e-4
    assert min(run.min_eig_sigma) > 0
    assert max(run.rhs_asymmetry) < 1e-10
    assert run.C_D_boundary[-1] == pytest.approx(run.C_D_bulk[-1], rel=1e-6)
    assert short_run.predict(np.array([[0.0, 1.5]])).shape == (1, 2)


def test_run_csv_columns(short_run, tmp_path):
    path = short_run.run_.write_csv(tmp_path / "ts.csv")
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == list(short_run.run_.COLUMNS)
    assert len(lines) == len(short_run.run_.t) + 1


def test_t_must_be_multiple_of_dt():
    with pytest.raises(ValueError):
        OldroydBChannelSolver(64, 40, (16, 14), dt=0.03, T=0.05, tensor_Ne=(12, 10)).fit()
