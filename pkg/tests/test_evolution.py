import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _oracles import ebdf3_global_error, ebdf3_local_error, observed_orders
from pespec import problems
from pespec.evolution import (
    BDF_COEFFICIENTS,
    EXTRAPOLATION_WEIGHTS,
    FieldState,
    HeatStepper,
    HistoryBuffer,
    NavierStokesProblem,
    NavierStokesStepper,
    Scheme,
    SolverFailure,
    TimeGrid,
    check_blowup,
    ebdf3_update,
    extrapolate,
    initialize_history,
    load_checkpoint,
    save_checkpoint,
    step_ns_imex_bdf4,
    step_unsteady_stokes,
)
from pespec.problems import HeatProblem


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_bdf_exact_on_polynomials(order):
    beta, a = BDF_COEFFICIENTS[order]
    dt = 0.1
    for p in range(order + 1):
        u = lambda t: t ** p  # noqa: E731
        du = p * 1.0 ** (p - 1) if p else 0.0
        lhs = u(1.0) - sum(ai * u(1.0 - (i + 1) * dt) for i, ai in enumerate(a))
        assert lhs == pytest.approx(beta * dt * du, abs=1e-13)


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_extrapolation_exact_on_polynomials(order):
    w = EXTRAPOLATION_WEIGHTS[order]
    for p in range(order):
        assert sum(wi * (-(i)) ** p for i, wi in enumerate(w)) == pytest.approx(1.0 ** p)


def test_ebdf3_is_third_order_against_rk4():
    """Oracle: global errors of eBDF-3 on frozen-flow relaxation fall as dt^3."""
    orders = observed_orders([ebdf3_global_error(dt) for dt in (0.04, 0.02, 0.01, 0.005)])
    assert np.all(np.abs(orders - 3.0) < 0.25)
    local = observed_orders([ebdf3_local_error(dt) for dt in (0.04, 0.02, 0.01)])
    assert np.all(local > 3.6)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(1e-3, 0.1))
def test_ebdf3_preserves_linear_trajectories(u0, slope, dt):
    vals = [np.array(u0 + slope * (-k * dt)) for k in range(3)]
    rates = [np.array(slope)] * 3
    assert float(ebdf3_update(vals, rates, dt)) == pytest.approx(u0 + slope * dt, abs=1e-12)


def test_time_grid_validation():
    g = TimeGrid(0.25, 1.0)
    assert g.steps == 4 and g.order == 4
    assert np.allclose(g.times, [0, 0.25, 0.5, 0.75, 1.0])
    with pytest.raises(ValueError):
        TimeGrid(0.3, 1.0)
    with pytest.raises(ValueError):
        TimeGrid(0.1, 1.0, init_ratio=0)
    assert TimeGrid(0.1, 1.0, scheme="ebdf3").scheme is Scheme.EXTRAPOLATED_BDF3


def test_history_buffer_newest_first():
    buf = HistoryBuffer(3)
    for k in range(5):
        buf.push(FieldState(k, np.array([k])))
    assert buf.full and buf.newest.t == 4 and buf[2].t == 2 and len(buf) == 3
    with pytest.raises(ValueError):
        buf.require(4)


def test_extrapolate_uses_weights():
    buf = HistoryBuffer(2)
    buf.push(FieldState(0, None, explicit=np.array([1.0])))
    buf.push(FieldState(1, None, explicit=np.array([3.0])))
    assert extrapolate(buf, 2)[0] == pytest.approx(5.0)


def test_check_blowup():
    check_blowup(np.ones(3), 1.0, 1)
    with pytest.raises(SolverFailure):
        check_blowup(np.array([np.nan]), 1.0, 2)
    with pytest.raises(SolverFailure) as info:
        check_blowup(np.array([1e9]), 1.0, 7)
    assert info.value.step == 7


def test_heat1d_short_run_accurate_and_no_refactorization():
    stepper = HeatStepper(problems.heat1d(128), 10, TimeGrid(1e-3, 0.05))
    run = stepper.run(record_every=10)
    assert run.factorizations_in_loop == 0
    assert run.final_errors["Linf"] < 1e-6


@pytest.mark.parametrize("policy", ["backward_euler", "forward_euler"])
def test_heat_one_step_initializations(policy):
    stepper = HeatStepper(problems.heat1d(128), 10, TimeGrid(1e-3, 0.02, init_policy=policy, init_ratio=10))
    assert stepper.run(record_every=5).final_errors["Linf"] < 1e-4


def test_heat_zero_trajectory_stays_zero():
    base = problems.heat1d(64)
    zero = HeatProblem(base.domain, lambda t, p: np.zeros(len(p)), lambda t, p: np.zeros(len(p)))
    run = HeatStepper(zero, 8, TimeGrid(1e-2, 0.1)).run()
    assert np.max(np.abs(run.final.values)) == 0.0


def test_heat_checkpoint_resume_is_bitwise(tmp_path):
    prob = problems.heat1d(64)
    full = HeatStepper(prob, 8, TimeGrid(1e-2, 0.2)).run(checkpoint_dir=tmp_path, checkpoint_stride=10)
    path = tmp_path / "heat_0000010.pext"
    hist = load_checkpoint(path, full.final.values.shape, 0.1, 1e-2)
    resumed = HeatStepper(prob, 8, TimeGrid(1e-2, 0.2)).run(history=hist, start_step=10)
    assert np.array_equal(resumed.final.values, full.final.values)


def test_checkpoint_round_trip(tmp_path):
    buf = HistoryBuffer(2)
    buf.push(FieldState(0.0, np.arange(4.0).reshape(2, 2), explicit=np.ones((2, 2))))
    buf.push(FieldState(0.1, np.arange(4.0, 8.0).reshape(2, 2), explicit=np.zeros((2, 2))))
    path = save_checkpoint(tmp_path / "c.pext", buf, 1)
    back = load_checkpoint(path, (2, 2), 0.1, 0.1, with_explicit=True)
    assert back.newest.t == pytest.approx(0.1)
    assert np.array_equal(back[1].values, buf[1].values)
    assert np.array_equal(back[1].explicit, buf[1].explicit)


def _zero_ns(N=32):
    dom = problems.torus_fluid_domain(N)
    zero = lambda t, p: np.zeros((len(p), 2))  # noqa: E731
    return NavierStokesProblem(dom, zero, zero, lambda p: np.zeros((len(p), 2)),
                               lambda p: np.zeros((len(p), 2, 2)), name="zero")


def test_ns_zero_trajectory():
    stepper = NavierStokesStepper(_zero_ns(), 6, TimeGrid(1e-2, 0.06, init_policy="backward_euler"))
    run = stepper.run()
    assert np.max(np.abs(run.final.values)) < 1e-14


def test_imex_without_advection_equals_unsteady_stokes():
    prob = problems.ns_torus(32, "exact")
    stepper = NavierStokesStepper(prob, 6, TimeGrid(1e-2, 0.05), advect=False)
    hist = stepper.initialize_history()
    t = 4 * 1e-2
    f = prob.forcing(t, stepper.interior_nodes)
    g = prob.boundary(t, stepper.boundary_nodes)
    a = step_ns_imex_bdf4(hist, f, g, stepper, 1e-2)
    b = step_unsteady_stokes(hist, f, g, stepper, 1e-2)
    assert np.allclose(a.values, b.values, atol=1e-13)


def test_unsteady_stokes_linear_in_data():
    prob = problems.ns_torus(32, "exact")
    stepper = NavierStokesStepper(prob, 6, TimeGrid(1e-2, 0.05), advect=False)
    hist = stepper.initialize_history()
    rng = np.random.default_rng(0)
    nI, nb = len(stepper.interior_nodes), len(stepper.boundary_nodes)
    f1, f2 = rng.standard_normal((nI, 2)), rng.standard_normal((nI, 2))
    g1, g2 = rng.standard_normal((nb, 2)), rng.standard_normal((nb, 2))
    zero = HistoryBuffer(4)
    for k in range(4):
        zero.push(FieldState(k * 1e-2, np.zeros((nI, 2)), explicit=np.zeros((nI, 2))))
    s = lambda f, g: step_unsteady_stokes(zero, f, g, stepper, 1e-2).values  # noqa: E731
    assert np.allclose(s(2 * f1 + f2, 2 * g1 + g2), 2 * s(f1, g1) + s(f2, g2), atol=1e-10)
    assert hist.full


def test_ns_torus_exact_short_run():
    stepper = NavierStokesStepper(problems.ns_torus(32, "exact"), 8, TimeGrid(1e-3, 0.02))
    run = stepper.run(record_every=5)
    assert run.factorizations_in_loop == 0
    assert run.final_errors["u1_Linf"] < 1e-4
    assert max(run.divergence) < 1e-10


def test_initialize_history_policy_override():
    stepper = NavierStokesStepper(problems.ns_torus(32, "exact"), 6, TimeGrid(1e-2, 0.05))
    hist = initialize_history("backward_euler", stepper)
    assert len(hist) == 4 and stepper.grid.init_policy.value == "exact"
    assert hist[3].solution is None and hist[0].solution is not None
