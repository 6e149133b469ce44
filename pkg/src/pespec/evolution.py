"""Time stepping for the heat and incompressible Navier-Stokes equations.

Both equations are advanced with backward differentiation formulas.  Every
BDF step is one extension solve with ``L = I - beta*dt*Delta``; the system
is assembled and factorized once per run and reused for each step.  In the
Navier-Stokes case the advection term is extrapolated from past levels
(IMEX), so only the linear Stokes part is implicit.

History initialization follows one of three policies: exact states from a
reference solution, backward Euler, or forward Euler on a finer step.
"""

from __future__ import annotations

import enum
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_positive
from .elliptic import EllipticPESolver, EllipticProblem, compute_error_norms
from .extension import ExtensionSystem, ScalarOperator, assemble_theta_columns, read_pext, write_pext
from .geometry import BCKind, DomainKind

BDF_COEFFICIENTS = {
    1: (1.0, (1.0,)),
    2: (2.0 / 3.0, (4.0 / 3.0, -1.0 / 3.0)),
    3: (6.0 / 11.0, (18.0 / 11.0, -9.0 / 11.0, 2.0 / 11.0)),
    4: (12.0 / 25.0, (48.0 / 25.0, -36.0 / 25.0, 16.0 / 25.0, -3.0 / 25.0)),
}
"""Order -> ``(beta, a)`` with ``u^{n+1} - beta*dt*F^{n+1} = sum_i a_i u^{n-i}``."""

EXTRAPOLATION_WEIGHTS = {1: (1.0,), 2: (2.0, -1.0), 3: (3.0, -3.0, 1.0), 4: (4.0, -6.0, 4.0, -1.0)}
"""Order -> weights extrapolating ``F^{n+1}`` from ``F^n, F^{n-1}, ...``."""

BLOWUP_FACTOR = 1e6


class Scheme(enum.Enum):
    BDF4 = "bdf4"
    EXTRAPOLATED_BDF3 = "ebdf3"
    BACKWARD_EULER = "backward_euler"
    FORWARD_EULER = "forward_euler"

    @property
    def order(self):
        return {"bdf4": 4, "ebdf3": 3}.get(self.value, 1)


class InitPolicy(enum.Enum):
    EXACT_HISTORY = "exact"
    BACKWARD_EULER = "backward_euler"
    FORWARD_EULER = "forward_euler"


class SolverFailure(RuntimeError):
    """Raised when a time integration blows up; ``step`` is the offending step index."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.message = message
        self.step = step


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid.

    Attributes:
        dt: time step.
        T: final time; must be an integer multiple of ``dt``.
        scheme: multistep scheme.
        init_policy: how the first ``order - 1`` levels are produced.
        init_ratio: number of one-step substeps per ``dt`` during initialization.
    """

    dt: float
    T: float
    scheme: Scheme = Scheme.BDF4
    init_policy: InitPolicy = InitPolicy.EXACT_HISTORY
    init_ratio: int = 1

    def __post_init__(self):
        check_positive(self.dt, "dt")
        if self.T < 0:
            raise ValueError("T must be nonnegative")
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "init_policy", InitPolicy(self.init_policy))
        if int(self.init_ratio) < 1:
            raise ValueError("init_ratio must be a positive integer")
        n = round(self.T / self.dt)
        if abs(n * self.dt - self.T) > 1e-12 * max(1.0, abs(self.T)):
            raise ValueError(f"T={self.T} is not a multiple of dt={self.dt}")

    @property
    def steps(self):
        return int(round(self.T / self.dt))

    @property
    def order(self):
        return self.scheme.order

    @property
    def times(self):
        return self.dt * np.arange(self.steps + 1)


class HistoryBuffer:
    """Fixed-capacity ring buffer of past states, newest first.

    ``buffer[0]`` is the most recent state and ``buffer[k]`` lies ``k`` steps
    back.  Pushing into a full buffer evicts the oldest state.
    """

    def __init__(self, capacity):
        self.capacity = int(capacity)
        self._items = deque(maxlen=self.capacity)

    def push(self, state):
        self._items.appendleft(state)

    def __getitem__(self, lag):
        return self._items[lag]

    def __len__(self):
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    @property
    def full(self):
        return len(self._items) == self.capacity

    @property
    def newest(self):
        return self._items[0]

    def require(self, n):
        if len(self._items) < n:
            raise ValueError(f"history holds {len(self._items)} states, {n} needed")


@dataclass
class FieldState:
    """Solution at one time level.

    Attributes:
        t: time.
        values: nodal values at interior nodes (``(nI,)`` or ``(nI, 2)``).
        solution: coefficient representation (``None`` for exact states).
        explicit: explicitly treated term at this level (advection), if any.
        sigma: implicit coefficient of the system that produced ``solution``.
        divergence: max interior divergence (fluids only).
    """

    t: float
    values: np.ndarray
    solution: object = None
    explicit: np.ndarray = None
    sigma: float = None
    divergence: float = None


def bdf_combination(history, order):
    """``sum_i a_i values^{n-i}`` for the BDF of the given order."""
    history.require(order)
    _, a = BDF_COEFFICIENTS[order]
    return sum(ai * history[i].values for i, ai in enumerate(a))


def extrapolate(history, order, attr="explicit"):
    """Extrapolated value of ``attr`` at the next level from the ``order`` newest states."""
    history.require(order)
    return sum(w * getattr(history[i], attr) for i, w in enumerate(EXTRAPOLATION_WEIGHTS[order]))


def ebdf3_update(values, rates, dt):
    """Explicit extrapolated BDF-3 update.

    Args:
        values: ``[u^n, u^{n-1}, u^{n-2}]``.
        rates: ``[F^n, F^{n-1}, F^{n-2}]`` with ``u_t = F(u)``.
        dt: time step.

    Returns:
        ``u^{n+1} = (18 u^n - 9 u^{n-1} + 2 u^{n-2})/11 + (6 dt/11)(3F^n - 3F^{n-1} + F^{n-2})``.
    """
    beta, a = BDF_COEFFICIENTS[3]
    e = EXTRAPOLATION_WEIGHTS[3]
    return sum(ai * v for ai, v in zip(a, values)) + beta * dt * sum(ei * r for ei, r in zip(e, rates))


def check_blowup(values, reference, step):
    """Abort when values are non-finite or exceed ``BLOWUP_FACTOR`` times ``reference``."""
    peak = float(np.max(np.abs(values))) if np.size(values) else 0.0
    if not np.isfinite(peak):
        raise SolverFailure("non-finite values", step)
    if peak > BLOWUP_FACTOR * max(reference, np.finfo(float).tiny):
        raise SolverFailure(f"solution grew to {peak:.3e} (initial max {reference:.3e})", step)


def save_checkpoint(path, history, step):
    """Write the history (newest first, one row per level) to a PEXT file."""
    rows = []
    for s in history:
        row = [np.ravel(s.values)]
        if s.explicit is not None:
            row.append(np.ravel(s.explicit))
        rows.append(np.concatenate(row))
    write_pext(Path(path), np.vstack(rows))
    return Path(path)


def load_checkpoint(path, shape, t_newest, dt, with_explicit=False):
    """Rebuild a :class:`HistoryBuffer` saved by :func:`save_checkpoint`."""
    data = read_pext(Path(path))
    size = int(np.prod(shape))
    buf = HistoryBuffer(data.shape[0])
    for k in range(data.shape[0] - 1, -1, -1):
        row = data[k]
        explicit = row[size: 2 * size].reshape(shape) if with_explicit else None
        buf.push(FieldState(t_newest - k * dt, row[:size].reshape(shape), None, explicit))
    return buf


def track_boundary_error(trace, g_exact):
    """Max deviation ``|trace - g|`` over boundary nodes (0 when there are none)."""
    trace = np.asarray(trace, dtype=float)
    if trace.size == 0:
        return 0.0
    diff = np.abs(trace - np.asarray(g_exact, dtype=float))
    if diff.ndim > 1:
        diff = np.sqrt(np.sum(diff ** 2, axis=1))
    return float(diff.max())


@dataclass
class RunResult:
    """Output of a time integration.

    Attributes:
        times: times at which diagnostics were recorded.
        boundary_deviation: boundary trace error per recorded time.
        errors: interior sup-norm error per recorded time (when exact data exist).
        divergence: max interior divergence per recorded time (fluids only).
        final: final :class:`FieldState`.
        final_errors: error norms at the final time.
        factorizations_in_loop: re-factorizations inside the step loop (always 0).
        seconds: wall time.
    """

    times: list = field(default_factory=list)
    boundary_deviation: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    divergence: list = field(default_factory=list)
    final: FieldState = None
    final_errors: dict = field(default_factory=dict)
    factorizations_in_loop: int = 0
    seconds: float = 0.0


# ---------------------------------------------------------------------------
# heat equation


class HeatStepper:
    """BDF stepper for ``u_t = Delta u + f`` with Dirichlet data on a torus-embedded domain.

    Args:
        problem: a heat problem with ``domain``, ``exact(t, p)`` and ``forcing(t, p)``;
            ``exact`` also supplies boundary data and initial values.
        Ne: Fourier cutoff.
        grid: the :class:`TimeGrid`.
        formulation: ``"G"`` or ``"H"``.
    """

    def __init__(self, problem, Ne, grid, formulation="G"):
        self.problem = problem
        self.Ne = Ne
        self.grid = grid
        self.formulation = formulation
        self._solvers = {}
        dom = problem.domain
        segs = [s for s in dom.boundary if s.kind is BCKind.DIRICHLET]
        self.boundary_nodes = np.concatenate([s.nodes for s in segs]) if segs else np.zeros((0, dom.computational.ndim))
        self.interior_nodes = dom.interior_points

    def implicit_solver(self, sigma):
        """Factorized solver for ``(I - sigma*Delta) u = F``, built once per ``sigma``."""
        key = float(sigma)
        if key not in self._solvers:
            op = ScalarOperator.helmholtz(sigma, 1.0)
            shell = EllipticProblem(self.problem.domain, op, forcing=None, name="heat step")
            solver = EllipticPESolver(self.Ne, self.formulation)
            solver.explicit_q = True
            solver.build(shell)
            interior = assemble_theta_columns(solver.basis_, op, self.interior_nodes, self.formulation)
            trace = assemble_theta_columns(solver.basis_, op, self.boundary_nodes, self.formulation)
            self._solvers[key] = (solver, interior, trace)
        return self._solvers[key]

    def _implicit(self, sigma, rhs, t_next):
        solver, interior, _ = self.implicit_solver(sigma)
        coefs = solver.solve(rhs, self.problem.exact(t_next, self.boundary_nodes))
        return FieldState(t_next, interior @ coefs.c, coefs, sigma=sigma)

    def trace(self, state):
        """Boundary trace of the extended solution (exact states use the exact trace)."""
        if state.solution is None:
            return self.problem.exact(state.t, self.boundary_nodes)
        _, _, trace = self.implicit_solver(state.sigma)
        return trace @ state.solution.c

    def step(self, history, t_next, order=4, dt=None):
        """One BDF step of the given order from ``history``."""
        dt = self.grid.dt if dt is None else dt
        beta, _ = BDF_COEFFICIENTS[order]
        f = self.problem.forcing(t_next, self.interior_nodes)
        rhs = bdf_combination(history, order) + beta * dt * f
        return self._implicit(beta * dt, rhs, t_next)

    def forward_euler_step(self, state, dt):
        """Explicit Euler step using the Laplacian of a smooth extension of ``state``."""
        solver = self.implicit_solver(0.0)[0]
        solver.solve(state.values, self.problem.exact(state.t, self.boundary_nodes))
        dim = solver.basis_.dim
        lap = sum(solver.predict(self.interior_nodes, tuple(2 * int(i == k) for i in range(dim))) for k in range(dim))
        values = state.values + dt * (lap + self.problem.forcing(state.t, self.interior_nodes))
        return FieldState(state.t + dt, values)

    def initialize_history(self):
        """History holding ``order`` levels at ``t = 0, dt, ...``."""
        g = self.grid
        order = g.order
        buf = HistoryBuffer(order)
        exact = self.problem.exact
        if g.init_policy is InitPolicy.EXACT_HISTORY:
            if exact is None:
                raise ValueError("exact-history initialization needs a reference solution")
            for k in range(order):
                buf.push(FieldState(k * g.dt, exact(k * g.dt, self.interior_nodes)))
            return buf
        state = FieldState(0.0, exact(0.0, self.interior_nodes))
        buf.push(state)
        sub = g.dt / g.init_ratio
        for k in range(1, order):
            for _ in range(g.init_ratio):
                if g.init_policy is InitPolicy.BACKWARD_EULER:
                    one = HistoryBuffer(1)
                    one.push(state)
                    state = self.step(one, state.t + sub, order=1, dt=sub)
                else:
                    state = self.forward_euler_step(state, sub)
            state.t = k * g.dt
            buf.push(state)
        return buf

    def run(self, record_every=1, checkpoint_dir=None, checkpoint_stride=0, history=None, start_step=None):
        """Integrate to ``T``; returns a :class:`RunResult`.

        Args:
            record_every: diagnostic stride in steps.
            checkpoint_dir: directory for history checkpoints (PEXT).
            checkpoint_stride: checkpoint every this many steps (0 disables).
            history: resume from this history instead of initializing.
            start_step: step index of ``history[0]`` when resuming.
        """
        t0 = time.perf_counter()
        g = self.grid
        order = g.order
        if history is None:
            history = self.initialize_history()
            start_step = order - 1
        beta, _ = BDF_COEFFICIENTS[order]
        solver = self.implicit_solver(beta * g.dt)[0]
        before = solver.system_.n_factorizations
        global_before = ExtensionSystem.factorizations
        reference = float(np.max(np.abs(history.newest.values))) or 1.0
        result = RunResult()
        exact = self.problem.exact
        for n in range(start_step + 1, g.steps + 1):
            t = n * g.dt
            state = self.step(history, t, order)
            history.push(state)
            check_blowup(state.values, reference, n)
            if n % record_every == 0 or n == g.steps:
                result.times.append(t)
                result.boundary_deviation.append(track_boundary_error(
                    self.trace(state), exact(t, self.boundary_nodes)))
                result.errors.append(float(np.max(np.abs(state.values - exact(t, self.interior_nodes)))))
            if checkpoint_dir and checkpoint_stride and n % checkpoint_stride == 0:
                Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)
                save_checkpoint(Path(checkpoint_dir) / f"heat_{n:07d}.pext", history, n)
        result.factorizations_in_loop = ExtensionSystem.factorizations - global_before
        assert solver.system_.n_factorizations == before, "step loop re-factorized"
        assert result.factorizations_in_loop == 0, "step loop re-factorized"
        result.final = history.newest
        result.final_errors = compute_error_norms(history.newest.values, exact(g.T, self.interior_nodes),
                                                  self.problem.domain)
        result.seconds = time.perf_counter() - t0
        return result


def step_heat_bdf4(history, f_next, g_next, stepper, dt):
    """One BDF-4 heat step with explicit forcing ``f_next`` and Dirichlet data ``g_next``.

    Returns the new :class:`FieldState` (values at interior nodes and coefficients).
    """
    history.require(4)
    beta, _ = BDF_COEFFICIENTS[4]
    solver, interior, _ = stepper.implicit_solver(beta * dt)
    rhs = bdf_combination(history, 4) + beta * dt * np.asarray(f_next, dtype=float)
    coefs = solver.solve(rhs, g_next)
    return FieldState(history.newest.t + dt, interior @ coefs.c, coefs, sigma=beta * dt)


# ---------------------------------------------------------------------------
# incompressible Navier-Stokes


@dataclass
class NavierStokesProblem:
    """``u_t + (u.grad)u - Delta u + grad p = f``, ``div u = 0``, ``u = g`` on the boundary.

    All data are callables of ``(t, points)`` except the initial fields.

    Attributes:
        domain: physical domain (torus or channel).
        forcing: ``f(t, p) -> (n, 2)``.
        boundary: ``g(t, p) -> (n, 2)``.
        initial_velocity: ``u0(p) -> (n, 2)``.
        initial_gradient: ``grad u0(p) -> (n, 2, 2)``.
        flow_rate: prescribed ``int u_1 dy`` for channel problems (``None`` to disable).
        exact_velocity, exact_gradient, exact_pressure: reference solution, if known.
    """

    domain: object
    forcing: object
    boundary: object
    initial_velocity: object
    initial_gradient: object
    flow_rate: float = None
    exact_velocity: object = None
    exact_gradient: object = None
    exact_pressure: object = None
    name: str = ""


def advection(u, grad):
    """``(u . grad) u`` from nodal velocity ``(n, 2)`` and gradient ``(n, 2, 2)``."""
    return np.einsum("nj,nij->ni", u, grad)


class NavierStokesStepper:
    """IMEX BDF stepper: implicit Stokes solve, extrapolated advection.

    Args:
        problem: a :class:`NavierStokesProblem`.
        Ne: extension cutoff (int, or pair for the channel).
        grid: :class:`TimeGrid`.
        dealias: drop coefficients above 2/3 of the cutoff before forming advection.
        advect: set ``False`` to integrate the unsteady Stokes equations.
    """

    def __init__(self, problem, Ne, grid, dealias=False, advect=True):
        self.problem = problem
        self.Ne = Ne
        self.grid = grid
        self.dealias = dealias
        self.advect = advect
        self._solvers = {}
        self.interior_nodes = problem.domain.interior_points

    def stokes_solver(self, sigma):
        """Factorized solver for ``(I - sigma*Delta) u + sigma*grad p = F``, built once per ``sigma``."""
        from .stokes import ChannelStokesSolver, TorusStokesSolver

        key = float(sigma)
        if key not in self._solvers:
            kind = self.problem.domain.computational.kind
            if kind is DomainKind.TORUS2D:
                solver = TorusStokesSolver(self.Ne, mass=1.0, sigma=sigma, pressure_scale=sigma)
            elif kind is DomainKind.CHANNEL:
                solver = ChannelStokesSolver(self.Ne, mass=1.0, sigma=sigma, pressure_scale=sigma,
                                             flow_rate=self.problem.flow_rate is not None, alpha_scale=sigma)
            else:
                raise ValueError(f"no Navier-Stokes stepper for {kind}")
            solver.explicit_q = True
            solver.build(self.problem.domain)
            self._solvers[key] = (solver, solver.trace_evaluator(solver.boundary_nodes_))
        return self._solvers[key]

    @property
    def boundary_nodes(self):
        return self.stokes_solver(self._bdf_sigma())[0].boundary_nodes_

    def _bdf_sigma(self):
        beta, _ = BDF_COEFFICIENTS[self.grid.order]
        return beta * self.grid.dt

    def _explicit(self, u, grad):
        if not self.advect:
            return np.zeros_like(u)
        return advection(u, grad)

    def _state(self, solver, sol, t):
        u, grad = solver.nodal_fields(sol)
        if self.dealias:
            ua, ga = solver.nodal_fields(sol, truncate=2.0 / 3.0)
            explicit = self._explicit(ua, ga)
        else:
            explicit = self._explicit(u, grad)
        div = float(np.max(np.abs(grad[:, 0, 0] + grad[:, 1, 1]))) if len(u) else 0.0
        return FieldState(t, u, sol, explicit, solver.sigma, div)

    def solve_stokes(self, sigma, rhs, t_next):
        """One implicit solve with boundary data and flow rate at ``t_next``."""
        solver, _ = self.stokes_solver(sigma)
        g = self.problem.boundary(t_next, solver.boundary_nodes_) if len(solver.boundary_nodes_) else None
        sol = solver.solve(rhs, g, self.problem.flow_rate)
        return self._state(solver, sol, t_next)

    def step(self, history, t_next, order=4, dt=None, explicit_forcing=False):
        """One IMEX BDF step of the given order."""
        dt = self.grid.dt if dt is None else dt
        beta, _ = BDF_COEFFICIENTS[order]
        t_f = history.newest.t if explicit_forcing else t_next
        rhs = bdf_combination(history, order) + beta * dt * (
            self.problem.forcing(t_f, self.interior_nodes) - extrapolate(history, order))
        return self.solve_stokes(beta * dt, rhs, t_next)

    def exact_state(self, t):
        p = self.problem
        u = p.exact_velocity(t, self.interior_nodes)
        return FieldState(t, u, None, self._explicit(u, p.exact_gradient(t, self.interior_nodes)))

    def initial_state(self):
        p = self.problem
        u = p.initial_velocity(self.interior_nodes)
        return FieldState(0.0, u, None, self._explicit(u, p.initial_gradient(self.interior_nodes)))

    def initialize_history(self):
        """History of ``order`` levels at ``t = 0, dt, ...`` per the grid's policy.

        Backward Euler treats forcing at the new level; forward Euler treats
        forcing and advection at the old level.  Both keep the Stokes part
        implicit so that every level satisfies the constraints.
        """
        g = self.grid
        order = g.order
        buf = HistoryBuffer(order)
        if g.init_policy is InitPolicy.EXACT_HISTORY:
            if self.problem.exact_velocity is None or self.problem.exact_gradient is None:
                raise ValueError("exact-history initialization needs a reference solution")
            for k in range(order):
                buf.push(self.exact_state(k * g.dt))
            return buf
        state = self.initial_state()
        buf.push(state)
        sub = g.dt / g.init_ratio
        explicit = g.init_policy is InitPolicy.FORWARD_EULER
        for k in range(1, order):
            for _ in range(g.init_ratio):
                one = HistoryBuffer(1)
                one.push(state)
                state = self.step(one, state.t + sub, order=1, dt=sub, explicit_forcing=explicit)
            state.t = k * g.dt
            buf.push(state)
        return buf

    def trace(self, state):
        if state.solution is None:
            return self.problem.exact_velocity(state.t, self.boundary_nodes)
        return self.stokes_solver(state.sigma)[1](state.solution)

    def run(self, record_every=1, checkpoint_dir=None, checkpoint_stride=0, history=None, start_step=None):
        """Integrate to ``T``; returns a :class:`RunResult`."""
        t0 = time.perf_counter()
        g = self.grid
        order = g.order
        if history is None:
            history = self.initialize_history()
            start_step = order - 1
        sigma = self._bdf_sigma()
        solver, _ = self.stokes_solver(sigma)
        for key in list(self._solvers):
            if key != float(sigma):
                del self._solvers[key]
        before = ExtensionSystem.factorizations
        reference = float(np.max(np.abs(history.newest.values))) or 1.0
        result = RunResult()
        nodes = self.boundary_nodes
        for n in range(start_step + 1, g.steps + 1):
            t = n * g.dt
            state = self.step(history, t, order)
            history.push(state)
            check_blowup(state.values, reference, n)
            if n % record_every == 0 or n == g.steps:
                result.times.append(t)
                g_t = self.problem.boundary(t, nodes) if len(nodes) else np.zeros((0, 2))
                result.boundary_deviation.append(track_boundary_error(self.trace(state), g_t))
                result.divergence.append(state.divergence)
                if self.problem.exact_velocity is not None:
                    err = state.values - self.problem.exact_velocity(t, self.interior_nodes)
                    result.errors.append(float(np.max(np.abs(err))))
            if checkpoint_dir and checkpoint_stride and n % checkpoint_stride == 0:
                Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)
                save_checkpoint(Path(checkpoint_dir) / f"ns_{n:07d}.pext", history, n)
        result.factorizations_in_loop = ExtensionSystem.factorizations - before
        assert result.factorizations_in_loop == 0, "step loop re-factorized"
        result.final = history.newest
        if self.problem.exact_velocity is not None:
            result.final_errors = self.errors_against_exact(history.newest)
        result.seconds = time.perf_counter() - t0
        return result

    def resume(self, checkpoint, step, **kwargs):
        """Continue a run from a checkpoint written at step ``step``."""
        history = load_checkpoint(checkpoint, (len(self.interior_nodes), 2), step * self.grid.dt, self.grid.dt,
                                  with_explicit=True)
        return self.run(history=history, start_step=step, **kwargs)

    def pressure(self, state):
        """Pressure at interior nodes with zero quadrature mean over the physical domain."""
        from .stokes import pressure_normalize

        return pressure_normalize(state.solution, self.problem.domain).pressure(self.interior_nodes)

    def errors_against_exact(self, state):
        """Sup and L2 errors of ``u_1``, ``u_2`` and mean-free ``p`` against the reference."""
        p = self.problem
        dom = p.domain
        ref = p.exact_velocity(state.t, self.interior_nodes)
        out = {}
        for i, name in enumerate(("u1", "u2")):
            e = compute_error_norms(state.values[:, i], ref[:, i], dom)
            out[f"{name}_Linf"], out[f"{name}_L2"] = e["Linf"], e["L2"]
        if p.exact_pressure is not None and state.solution is not None:
            w = dom.interior_weights
            pe = p.exact_pressure(state.t, self.interior_nodes)
            pe = pe - np.sum(w * pe) / np.sum(w)
            e = compute_error_norms(self.pressure(state), pe, dom)
            out["p_Linf"], out["p_L2"] = e["Linf"], e["L2"]
        return out


def step_ns_imex_bdf4(history, f_next, g_next, stepper, dt, flow_rate=None):
    """One IMEX BDF-4 Navier-Stokes step from explicit data.

    Args:
        history: four past states with advection terms.
        f_next: forcing at interior nodes at the new time, ``(nI, 2)``.
        g_next: boundary velocity at the new time, ``(nb, 2)``.
        stepper: a :class:`NavierStokesStepper` providing the factorized system.
        dt: time step.
        flow_rate: channel flow rate at the new time.
    """
    history.require(4)
    beta, _ = BDF_COEFFICIENTS[4]
    solver, _ = stepper.stokes_solver(beta * dt)
    rhs = bdf_combination(history, 4) + beta * dt * (np.asarray(f_next) - extrapolate(history, 4))
    sol = solver.solve(rhs, g_next, flow_rate)
    return stepper._state(solver, sol, history.newest.t + dt)


def step_unsteady_stokes(history, f_next, g_next, stepper, dt, flow_rate=None):
    """BDF-4 step of the unsteady Stokes equations (no advection)."""
    history.require(4)
    beta, _ = BDF_COEFFICIENTS[4]
    solver, _ = stepper.stokes_solver(beta * dt)
    rhs = bdf_combination(history, 4) + beta * dt * np.asarray(f_next)
    sol = solver.solve(rhs, g_next, flow_rate)
    return stepper._state(solver, sol, history.newest.t + dt)


def initialize_history(policy, stepper):
    """Build the starting history for ``stepper`` under ``policy`` (overriding its grid's policy)."""
    grid = stepper.grid
    stepper.grid = TimeGrid(grid.dt, grid.T, grid.scheme, policy, grid.init_ratio)
    try:
        return stepper.initialize_history()
    finally:
        stepper.grid = grid
