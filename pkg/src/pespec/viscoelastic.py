"""Stokes-Oldroyd-B flow past a disc in a periodic channel.

The polymer conformation is evolved through its symmetric square root
``b`` (``sigma = b b``) with an explicit extrapolated BDF-3 scheme.  Each
step re-extends the three independent components of ``b`` to the whole
channel by a least-squares fit, so that advection and stress divergence can
be differentiated spectrally, and then solves a channel Stokes problem with
the polymer stress divergence as forcing and a prescribed flow rate.

All quantities are in units where the disc radius and the mean velocity are
1; with ``X = U = 1`` the dimensional pressure and Lagrange forcing are the
solver's values scaled by the solvent viscosity.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_positive
from .basis import ChannelPressureBasis
from .evolution import SolverFailure, check_blowup
from .extension import ExtensionSystem, write_pext
from .geometry import Disc, Exterior, PhysicalDomain, build_channel_domain, gauss_legendre_rule

DEGENERATE_TRACE = 1e-12


@dataclass(frozen=True)
class OldroydBParams:
    """Material and flow parameters.

    Attributes:
        nu_s: solvent viscosity.
        nu_p: polymeric viscosity.
        Wi: Weissenberg number (relaxation time).
        X: length scale.
        U: velocity scale.
        q: flow rate through the channel.
    """

    nu_s: float = 0.59
    nu_p: float = 0.41
    Wi: float = 0.1
    X: float = 1.0
    U: float = 1.0
    q: float = 4.0

    def __post_init__(self):
        for name in ("nu_s", "nu_p", "Wi", "X", "U"):
            check_positive(getattr(self, name), name)

    @property
    def lam(self):
        """Dimensionless relaxation time ``(U/X) Wi``."""
        return self.U / self.X * self.Wi

    @property
    def xi(self):
        """Polymer coupling ``nu_p / (nu_s * lam)``."""
        return self.nu_p / (self.nu_s * self.lam)


# ---------------------------------------------------------------------------
# nodal 2x2 tensor algebra; tensors are arrays of shape (n, 2, 2)


def symmetric_from_components(c):
    """``(n, 3)`` components ``(b11, b12, b22)`` to ``(n, 2, 2)`` symmetric tensors."""
    c = np.asarray(c, dtype=float)
    out = np.empty(c.shape[:-1] + (2, 2))
    out[..., 0, 0] = c[..., 0]
    out[..., 0, 1] = out[..., 1, 0] = c[..., 1]
    out[..., 1, 1] = c[..., 2]
    return out


def components(b):
    """Independent components ``(b11, b12, b22)`` of symmetric tensors."""
    return np.stack([b[..., 0, 0], b[..., 0, 1], b[..., 1, 1]], axis=-1)


def inverse_2x2(m, where=None):
    """Closed-form inverse; raises :class:`SolverFailure` on a singular tensor."""
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    bad = ~(np.abs(det) > 0) | ~np.isfinite(det)
    if np.any(bad):
        i = int(np.flatnonzero(bad.ravel())[0])
        loc = "" if where is None else f" at {np.round(where[i], 6)}"
        raise SolverFailure(f"singular square-root conformation{loc}")
    inv = np.empty_like(m)
    inv[..., 0, 0] = m[..., 1, 1]
    inv[..., 1, 1] = m[..., 0, 0]
    inv[..., 0, 1] = -m[..., 0, 1]
    inv[..., 1, 0] = -m[..., 1, 0]
    return inv / det[..., None, None]


def symmetric_eigenvalues(m):
    """Eigenvalues ``(lo, hi)`` of symmetric 2x2 tensors."""
    mean = 0.5 * (m[..., 0, 0] + m[..., 1, 1])
    rad = np.hypot(0.5 * (m[..., 0, 0] - m[..., 1, 1]), m[..., 0, 1])
    return mean - rad, mean + rad


def compute_antisymmetric_a(b, grad_v, where=None):
    """Anti-symmetric ``a = [[0, w], [-w, 0]]`` making ``b (grad v)^T + a b`` symmetric.

    Args:
        b: symmetric tensors ``(n, 2, 2)``.
        grad_v: velocity gradients ``G[:, i, j] = d v_i / d x_j``.
        where: optional node coordinates for error messages.

    Returns:
        ``(n, 2, 2)`` anti-symmetric tensors.
    """
    m = b @ np.swapaxes(grad_v, -1, -2)
    tr = b[..., 0, 0] + b[..., 1, 1]
    bad = ~(np.abs(tr) > DEGENERATE_TRACE)
    if np.any(bad):
        i = int(np.flatnonzero(bad.ravel())[0])
        loc = "" if where is None else f" at {np.round(where[i], 6)}"
        raise SolverFailure(f"degenerate square-root conformation (trace {tr.ravel()[i]:.3e}){loc}")
    w = (m[..., 1, 0] - m[..., 0, 1]) / tr
    a = np.zeros_like(b)
    a[..., 0, 1] = w
    a[..., 1, 0] = -w
    return a


def evolution_rhs(b, grad_b, v, grad_v, lam, where=None):
    """Right-hand side ``F(b, v)`` of the square-root conformation equation.

    ``F = -(v . grad) b + b (grad v)^T + a b + ((b^T)^{-1} - b) / (2 lam)``.

    Args:
        b: ``(n, 2, 2)`` symmetric tensors.
        grad_b: ``(n, 2, 2, 2)`` with ``grad_b[:, i, j, k] = d b_ij / d x_k``.
        v: ``(n, 2)`` velocity.
        grad_v: ``(n, 2, 2)`` velocity gradient.
        lam: dimensionless relaxation time.
        where: optional node coordinates for error messages.
    """
    a = compute_antisymmetric_a(b, grad_v, where)
    adv = np.einsum("nk,nijk->nij", v, grad_b)
    inv_t = inverse_2x2(np.swapaxes(b, -1, -2), where)
    return -adv + b @ np.swapaxes(grad_v, -1, -2) + a @ b + (inv_t - b) / (2.0 * lam)


def asymmetry(t):
    return np.abs(t[..., 0, 1] - t[..., 1, 0])


# ---------------------------------------------------------------------------
# re-extension of tensor components


class TensorExtension:
    """Least-squares fit of nodal scalar fields on the physical region by channel products.

    Uses the channel pressure basis including the constant member.  One
    factorization serves every component and every time step.
    """

    def __init__(self, domain, Ne):
        comp = domain.computational
        (x0, x1), (a, b) = comp.bounds
        self.basis = ChannelPressureBasis(Ne, x1 - x0, a, b, include_constant=True)
        self.domain = domain
        self.system = ExtensionSystem([("interior", len(domain.interior))], self.basis.size)
        self.system.set_block("interior", self.basis.evaluate(domain.interior_points),
                              np.sqrt(domain.interior_weights))
        self.system.factorize(explicit_q=True)
        self.axes = comp.axes

    def fit(self, values):
        """Coefficients ``(size, k)`` for nodal values ``(nI, k)``."""
        s = self.system
        return s.solve(s.rhs(interior=np.asarray(values, dtype=float)))

    def grid(self, coefs, dx=0, dy=0):
        """Values of every fitted field on the full grid, shape ``(k, Nx*Ny)``."""
        xa, ya = self.axes
        return np.stack([self.basis.grid_evaluate(coefs[:, k], xa, ya, dx, dy).ravel()
                         for k in range(coefs.shape[1])])

    def evaluate(self, coefs, points, dx=0, dy=0):
        return self.basis.evaluate(points, dx, dy) @ coefs


def reextend_tensor(extension, b):
    """Fit the components of ``b`` (``(nI, 2, 2)``) and return their coefficients ``(size, 3)``."""
    return extension.fit(components(b))


# ---------------------------------------------------------------------------
# geometry, quadrature and drag


def viscoelastic_domain(Nx, Ny, half_length=6 * np.pi, radius=1.0, spacing=None):
    comp = build_channel_domain(Nx, Ny, 2 * half_length, -2.0, 2.0, -half_length)
    return PhysicalDomain.build(comp, Exterior(Disc((0.0, 0.0), radius)), spacing)


def disc_quadrature(n_angle=128, n_radius=32, radius=1.0, centre=(0.0, 0.0)):
    """Polar rule on a disc: uniform angles times Gauss-Legendre radii (weight ``r dr dtheta``)."""
    rr = gauss_legendre_rule(n_radius, 0.0, radius)
    th = 2 * np.pi * np.arange(n_angle) / n_angle
    R, TH = np.meshgrid(rr.nodes, th, indexing="ij")
    W = np.outer(rr.weights * rr.nodes, np.full(n_angle, 2 * np.pi / n_angle))
    pts = np.stack([centre[0] + R.ravel() * np.cos(TH.ravel()), centre[1] + R.ravel() * np.sin(TH.ravel())], axis=1)
    return pts, W.ravel()


@dataclass
class ViscoelasticState:
    """Fields at one time level.

    Attributes:
        t: time.
        b: nodal square-root conformation ``(nI, 2, 2)``.
        b_coefs: re-extension coefficients ``(size, 3)``.
        flow: Stokes solution (dimensionless velocity, pressure and Lagrange forcing).
        rate: ``F(b, v)`` at interior nodes.
    """

    t: float
    b: np.ndarray
    b_coefs: np.ndarray
    flow: object
    rate: np.ndarray = None


def polymer_stress(b, params):
    """``tau_p = (nu_p / Wi) (b b - I)``."""
    return params.nu_p / params.Wi * (b @ b - np.eye(2))


def drag_boundary(model, state, params):
    """Drag from the boundary integral of the total momentum flux around the disc."""
    nodes, weights, normals = model.obstacle_nodes, model.obstacle_weights, -model.obstacle_normals
    if state.flow is None:
        return 0.0
    sol = state.flow
    b = symmetric_from_components(model.extension.evaluate(state.b_coefs, nodes))
    tau = polymer_stress(b, params)
    p = params.nu_s * sol.pressure(nodes)
    alpha = params.nu_s * sol.alpha
    g = sol.velocity_gradient(nodes)
    strain = g + np.swapaxes(g, 1, 2)
    nx = normals[:, 0]
    integrand = (alpha * nodes[:, 0] * nx + np.einsum("nj,nj->n", tau[:, 0, :], normals) - p * nx
                 + params.nu_s * np.einsum("nj,nj->n", strain[:, 0, :], normals))
    return float(np.sum(weights * integrand))


def drag_bulk(model, state, params):
    """Drag from the disc-area integral of the x-component of the momentum-flux divergence."""
    if state.flow is None:
        return 0.0
    pts, w = model.disc_points, model.disc_weights
    sol = state.flow
    solver = model.stokes
    ext = model.extension
    b = symmetric_from_components(ext.evaluate(state.b_coefs, pts))
    bx = symmetric_from_components(ext.evaluate(state.b_coefs, pts, 1, 0))
    by = symmetric_from_components(ext.evaluate(state.b_coefs, pts, 0, 1))
    dsig_x = bx @ b + b @ bx
    dsig_y = by @ b + b @ by
    div_tau = params.nu_p / params.Wi * (dsig_x[:, 0, 0] + dsig_y[:, 0, 1])
    dpdx = params.nu_s * (solver.pressure_basis_.evaluate(pts, 1, 0) @ sol.pressure_coefs)
    lap_u1 = solver.velocity_basis_.laplacian(pts, 0) @ sol.velocity_coefs
    integrand = params.nu_s * sol.alpha + div_tau - dpdx + params.nu_s * lap_u1
    return float(np.sum(w * integrand))


# ---------------------------------------------------------------------------
# driver


@dataclass
class ViscoelasticRun:
    """Diagnostics of a run; one entry per recorded step."""

    t: list = field(default_factory=list)
    C_D_boundary: list = field(default_factory=list)
    C_D_bulk: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    flowrate_error: list = field(default_factory=list)
    noslip_error: list = field(default_factory=list)
    min_eig_sigma: list = field(default_factory=list)
    rhs_asymmetry: list = field(default_factory=list)
    min_inflow: list = field(default_factory=list)
    final: ViscoelasticState = None
    seconds: float = 0.0
    factorizations_in_loop: int = 0

    COLUMNS = ("t", "C_D_boundary", "C_D_bulk", "alpha", "flowrate_error", "noslip_error", "min_eig_sigma")

    def rows(self):
        return list(zip(*(getattr(self, c) for c in self.COLUMNS)))

    def write_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            for row in self.rows():
                w.writerow([f"{v:.17g}" for v in row])
        return path


class OldroydBChannelSolver(BaseEstimator):
    """Square-root Oldroyd-B flow past a disc with a prescribed flow rate.

    Args:
        Nx, Ny: channel grid.
        Ne: extension cutoff ``(Ne_x, Ne_y)`` for velocity, pressure and tensor fits.
        dt: time step.
        T: final time.
        params: :class:`OldroydBParams`.
        tensor_Ne: cutoff of the tensor re-extension; ``None`` reuses ``Ne``.  A
            cutoff below the flow cutoff damps a near-wall feedback between the
            fitted tensor and the velocity trace on coarse grids.
        record_every: diagnostic stride.
        drag_quadrature: ``(n_angle, n_radius)`` of the disc rule.
        half_length: the channel is ``(-half_length, half_length) x (-2, 2)``.
        flow_weight: weight of the flow-rate row in the Stokes objective.
    """

    def __init__(self, Nx=128, Ny=72, Ne=(32, 28), dt=5e-3, T=3.0, params=None, tensor_Ne=(24, 20), record_every=1,
                 drag_quadrature=(128, 32), half_length=np.pi, flow_weight=1.0):
        self.Nx = Nx
        self.Ny = Ny
        self.Ne = Ne
        self.dt = dt
        self.T = T
        self.params = params
        self.tensor_Ne = tensor_Ne
        self.record_every = record_every
        self.drag_quadrature = drag_quadrature
        self.half_length = half_length
        self.flow_weight = flow_weight

    # -- setup ------------------------------------------------------------

    def build(self):
        from .stokes import ChannelStokesSolver

        self.params_ = self.params or OldroydBParams()
        dom = viscoelastic_domain(self.Nx, self.Ny, self.half_length)
        self.domain_ = dom
        stokes = ChannelStokesSolver(self.Ne, mass=0.0, sigma=1.0, pressure_scale=1.0, flow_rate=True,
                                    flow_weight=self.flow_weight)
        stokes.explicit_q = True
        stokes.build(dom)
        self.stokes = stokes
        self.extension = TensorExtension(dom, self.tensor_Ne or self.Ne)
        self.obstacle_nodes = stokes.boundary_nodes_
        self.obstacle_normals = stokes.boundary_normals_
        self.obstacle_weights = stokes.boundary_weights_
        self.disc_points, self.disc_weights = disc_quadrature(*self.drag_quadrature)
        self._trace = stokes.trace_evaluator(self.obstacle_nodes)
        self.interior_points_ = dom.interior_points
        return self

    # -- single steps -------------------------------------------------------

    def _tensor_fields(self, coefs):
        """Re-extended ``b`` and its derivatives at interior nodes."""
        idx = self.domain_.interior
        ext = self.extension
        b = symmetric_from_components(ext.grid(coefs)[:, idx].T)
        grad = np.stack([symmetric_from_components(ext.grid(coefs, 1, 0)[:, idx].T),
                         symmetric_from_components(ext.grid(coefs, 0, 1)[:, idx].T)], axis=-1)
        return b, grad

    def stokes_step(self, b_coefs):
        """Solve the Stokes problem forced by ``xi div(b b)``; returns the solution."""
        b, grad = self._tensor_fields(b_coefs)
        dsig = np.einsum("nijk,njl->nilk", grad, b) + np.einsum("nij,njlk->nilk", b, grad)
        div = np.stack([dsig[:, 0, 0, 0] + dsig[:, 0, 1, 1], dsig[:, 1, 0, 0] + dsig[:, 1, 1, 1]], axis=1)
        forcing = self.params_.xi * div
        zero = np.zeros((len(self.obstacle_nodes), 2))
        q = self.params_.q / (self.params_.U * self.params_.X)
        return self.stokes.solve(forcing, zero, q)

    def rate(self, state):
        """``F(b, v)`` at interior nodes from the re-extended ``b`` and the current flow."""
        _, grad_b = self._tensor_fields(state.b_coefs)
        v, grad_v = self.stokes.nodal_fields(state.flow)
        return evolution_rhs(state.b, grad_b, v, grad_v, self.params_.lam, self.interior_points_)

    def make_state(self, t, b):
        coefs = reextend_tensor(self.extension, b)
        flow = self.stokes_step(coefs)
        state = ViscoelasticState(t, b, coefs, flow)
        state.rate = self.rate(state)
        return state

    def coupled_step(self, history, dt):
        """Advance ``b`` (eBDF-3, or forward Euler while the history is short), re-extend, solve Stokes."""
        from .evolution import ebdf3_update

        if len(history) >= 3:
            b_next = ebdf3_update([s.b for s in history[:3]], [s.rate for s in history[:3]], dt)
        else:
            b_next = history[0].b + dt * history[0].rate
        b_next = 0.5 * (b_next + np.swapaxes(b_next, 1, 2))
        return self.make_state(history[0].t + dt, b_next)

    # -- diagnostics ----------------------------------------------------------

    def diagnostics(self, state):
        p = self.params_
        trace = self._trace(state.flow)
        speed = float(np.max(np.abs(self.stokes.nodal_fields(state.flow)[0]))) or 1.0
        inflow = np.einsum("nc,nc->n", trace, -self.obstacle_normals)
        lo, _ = symmetric_eigenvalues(state.b)
        q = p.q / (p.U * p.X)
        return {
            "t": state.t,
            "C_D_boundary": drag_boundary(self, state, p),
            "C_D_bulk": drag_bulk(self, state, p),
            "alpha": p.nu_s * state.flow.alpha,
            "flowrate_error": abs(self.stokes.flow_rate_of(state.flow) - q) / abs(q),
            "noslip_error": float(np.max(np.abs(trace))) if trace.size else 0.0,
            "min_eig_sigma": float(np.min(lo ** 2)),
            "rhs_asymmetry": float(np.max(asymmetry(state.rate))),
            "min_inflow": float(np.min(-inflow)) / speed if inflow.size else 0.0,
        }

    def tau_xx_on_boundary(self, state):
        b = symmetric_from_components(self.extension.evaluate(state.b_coefs, self.obstacle_nodes))
        return polymer_stress(b, self.params_)[:, 0, 0]

    def tau_xx_interior(self, state):
        return polymer_stress(state.b, self.params_)[:, 0, 0]

    # -- full run -------------------------------------------------------------

    def fit(self, X=None, y=None, snapshot_dir=None, snapshot_stride=0, progress=None):
        """Integrate from ``tau_p = 0`` to ``T``; diagnostics go to ``run_``."""
        t0 = time.perf_counter()
        if not hasattr(self, "stokes"):
            self.build()
        n_steps = int(round(self.T / self.dt))
        if abs(n_steps * self.dt - self.T) > 1e-12 * max(1.0, self.T):
            raise ValueError("T must be a multiple of dt")
        nI = len(self.interior_points_)
        run = ViscoelasticRun()
        state = self.make_state(0.0, np.broadcast_to(np.eye(2), (nI, 2, 2)).copy())
        before = ExtensionSystem.factorizations
        history = [state]
        reference = float(np.max(np.abs(state.b)))
        self._record(run, state)
        for n in range(1, n_steps + 1):
            state = self.coupled_step(history, self.dt)
            check_blowup(state.b, reference, n)
            history = [state] + history[:2]
            lo, _ = symmetric_eigenvalues(state.b)
            if not np.all(lo ** 2 > 0):
                raise SolverFailure("conformation lost positive definiteness", n)
            if n % self.record_every == 0 or n == n_steps:
                self._record(run, state)
                if progress:
                    progress(run)
            if snapshot_dir and snapshot_stride and n % snapshot_stride == 0:
                Path(snapshot_dir).mkdir(parents=True, exist_ok=True)
                write_pext(Path(snapshot_dir) / f"b_coefs_{n:06d}.pext", state.b_coefs.T)
        run.factorizations_in_loop = ExtensionSystem.factorizations - before
        assert run.factorizations_in_loop == 0, "step loop re-factorized"
        run.final = state
        run.seconds = time.perf_counter() - t0
        self.run_ = run
        return self

    def _record(self, run, state):
        for key, value in self.diagnostics(state).items():
            getattr(run, key).append(value)

    def predict(self, points):
        """Dimensional velocity of the final state at ``points``."""
        return self.params_.U * self.run_.final.flow.velocity(points)


def newtonian_drag(Nx=128, Ny=72, Ne=(32, 28), viscosity=1.0, q=4.0, drag_quadrature=(128, 32), **kwargs):
    """Boundary and bulk drag of steady Newtonian flow in the same geometry (``tau_p = 0``)."""
    params = OldroydBParams(nu_s=viscosity, nu_p=1e-300, Wi=1.0, q=q)
    model = OldroydBChannelSolver(Nx, Ny, Ne, params=params, drag_quadrature=drag_quadrature, **kwargs).build()
    nI = len(model.interior_points_)
    b = np.broadcast_to(np.eye(2), (nI, 2, 2)).copy()
    coefs = reextend_tensor(model.extension, b)
    state = ViscoelasticState(0.0, b, coefs, model.stokes_step(coefs))
    return drag_boundary(model, state, params), drag_bulk(model, state, params), model, state
