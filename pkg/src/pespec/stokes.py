"""Steady Stokes solvers built on least-squares extension.

Three set-ups are provided:

* :class:`TorusStokesSolver` extends the forcing on the 2D torus.  Each column
  is the periodic Stokes response to a single Fourier forcing mode, obtained in
  closed form by Leray projection followed by the diagonal inverse of the
  operator.  Constant velocities span the kernel of ``-Delta`` and are
  handled through null-space unknowns.
* :class:`ChannelStokesSolver` extends velocity and pressure directly in an
  x-periodic channel.  Velocities are curls of stream functions that vanish to
  second order at the walls, so no-slip on the walls and incompressibility
  hold by construction.  An optional flow-rate row and Lagrange forcing
  ``(alpha, 0)`` replace inflow data.
* :class:`SphereStokesSolver` does the same on the unit sphere with
  divergence-free tangent fields built from spherical harmonics.

Vector data are interleaved node by node: row ``2 i + c`` holds component ``c``
at node ``i``.  Operators are ``mass*I - sigma*Delta`` with pressure gradient
scaled by ``pressure_scale``, which covers both steady Stokes
(``mass=0, sigma=1``) and implicit time steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_int, check_values
from .basis import (
    ChannelPressureBasis,
    ChannelVelocityBasis,
    FourierBasis,
    SphericalHarmonicBasis,
    SphereVelocityBasis,
)
from .extension import ExtensionSystem, NullSpace
from .geometry import DomainKind


def interleave(*components):
    """Stack per-component (n, ...) arrays into node-major (n*ncomp, ...) rows."""
    first = np.asarray(components[0])
    out = np.empty((first.shape[0] * len(components),) + first.shape[1:])
    for c, comp in enumerate(components):
        out[c:: len(components)] = comp
    return out


def _stack_segments(domain):
    segs = domain.boundary
    if not segs:
        return np.zeros((0, domain.computational.ndim)), np.zeros(0), np.zeros((0, 2))
    return (np.concatenate([s.nodes for s in segs]), np.concatenate([s.weights for s in segs]),
            np.concatenate([s.normals for s in segs]))


@dataclass
class StokesSolution:
    """Coefficients of an extended velocity/pressure pair.

    Attributes:
        velocity_coefs: velocity expansion coefficients (layout depends on the solver).
        pressure_coefs: pressure expansion coefficients.
        alpha: Lagrange forcing enforcing the flow rate (channel only).
        d: null-space velocity coefficients (torus only).
        pressure_offset: constant subtracted from the pressure on evaluation.
    """

    model: object
    velocity_coefs: np.ndarray
    pressure_coefs: np.ndarray
    alpha: float = 0.0
    d: np.ndarray = field(default_factory=lambda: np.zeros(0))
    pressure_offset: float = 0.0

    def velocity(self, points, deriv=None):
        return self.model.eval_velocity(self, points, deriv)

    def pressure(self, points):
        return self.model.eval_pressure(self, points) - self.pressure_offset

    def velocity_gradient(self, points):
        """``G[:, i, j] = d u_i / d x_j``."""
        g = np.empty((len(points), 2, 2))
        for j, d in enumerate(((1, 0), (0, 1))):
            g[:, :, j] = self.velocity(points, d)
        return g

    def divergence(self, points):
        return self.model.eval_divergence(self, points)


def pressure_normalize(solution, domain):
    """Shift the pressure so its quadrature mean over the physical domain is zero."""
    pts = domain.interior_points
    w = domain.interior_weights
    mean = float(np.sum(w * solution.pressure(pts)) / np.sum(w))
    return replace(solution, pressure_offset=solution.pressure_offset + mean)


class _StokesBase(BaseEstimator):
    explicit_q = False

    def _check(self):
        check_int(self.Ne if np.ndim(self.Ne) == 0 else self.Ne[0], "Ne", minimum=1)
        if self.sigma < 0 or self.mass < 0:
            raise ValueError("mass and sigma must be nonnegative")

    def solve_problem(self, problem):
        dom = self.domain_
        f = problem.forcing(dom.interior_points)
        g = problem.boundary(self.boundary_nodes_) if len(self.boundary_nodes_) else np.zeros((0, 2))
        return self.solve(f, g, getattr(problem, "flow_rate", None))

    def fit(self, problem, y=None):
        """Build the system for ``problem.domain`` and solve with its data."""
        self.build(problem.domain)
        self.solution_ = self.solve_problem(problem)
        return self

    def predict(self, points):
        """Velocity of the fitted solution at ``points`` (shape (n, 2))."""
        return self.solution_.velocity(points)

    def nodal_fields(self, sol, truncate=None):
        """Velocity ``(nI, 2)`` and gradient ``(nI, 2, 2)`` at interior nodes via tensor-grid evaluation.

        Args:
            sol: solution to evaluate.
            truncate: optional fraction of the cutoff; coefficients above it are
                dropped first (the 2/3 rule uses ``2/3``).
        """
        if truncate is not None:
            sol = self.truncated(sol, truncate)
        idx = self.domain_.interior
        u = self.grid_velocity(sol).reshape(2, -1)[:, idx].T
        grad = np.stack([self.grid_velocity(sol, d).reshape(2, -1)[:, idx].T for d in ((1, 0), (0, 1))], axis=2)
        return u, grad

    def trace_evaluator(self, points):
        """Fast repeated velocity evaluation at fixed ``points``: returns ``sol -> (n, 2)``."""
        mats = self._velocity_matrices(points)

        def evaluate(sol):
            return np.stack([m @ c for m, c in zip(mats, self._velocity_vectors(sol))], axis=1) + \
                self._velocity_offset(sol, points)

        return evaluate

    def _velocity_offset(self, sol, points):
        return 0.0

    def _rhs(self, forcing, boundary):
        s = self.system_
        nI = len(self.domain_.interior)
        f = check_values(forcing, nI, "forcing", 2)
        data = {"interior": interleave(f[:, 0], f[:, 1])}
        nb = len(self.boundary_nodes_)
        if nb:
            g = check_values(boundary, nb, "boundary data", 2)
            data["boundary"] = interleave(g[:, 0], g[:, 1])
        return s, data


class TorusStokesSolver(_StokesBase):
    """Forcing-extension Stokes solver on the 2D torus.

    Solves ``(mass - sigma*Delta) u + pressure_scale * grad p = f``,
    ``div u = 0`` in the physical domain with Dirichlet velocity data.

    Args:
        Ne: Fourier cutoff.
        mass, sigma: operator coefficients.
        pressure_scale: factor on the pressure gradient.
        rank_tol: optional relative QR pivot threshold.
    """

    def __init__(self, Ne=16, mass=0.0, sigma=1.0, pressure_scale=1.0, rank_tol=None):
        self.Ne = Ne
        self.mass = mass
        self.sigma = sigma
        self.pressure_scale = pressure_scale
        self.rank_tol = rank_tol

    def _transfer(self, basis):
        """Velocity transfer ``T[i, l, j]`` from forcing component l of member j to velocity component i."""
        m = basis.wavenumbers.astype(float)
        k2 = np.sum(m ** 2, axis=1)
        sym = self.mass + self.sigma * k2
        zero = k2 == 0
        safe = np.where(zero, 1.0, k2)
        T = np.empty((2, 2, basis.size))
        for i in range(2):
            for l in range(2):
                T[i, l] = (float(i == l) - m[:, i] * m[:, l] / safe)
        if self.mass > 0:
            T[:, :, zero] = (np.eye(2) / self.mass)[:, :, None]
        else:
            T[:, :, zero] = 0.0
        T[:, :, ~zero] /= sym[~zero]
        pres = np.where(zero, 0.0, 1.0 / (safe * self.pressure_scale))
        return T, pres

    @staticmethod
    def periodic_mode_solve(j, l, mass=0.0, sigma=1.0, pressure_scale=1.0):
        """Complex amplitudes ``(u_hat, p_hat)`` of the periodic response to forcing ``e_l e^{i j.x}``."""
        j = np.asarray(j, dtype=float)
        k2 = float(j @ j)
        if k2 == 0:
            raise ValueError("the zero mode lies in the kernel; no periodic response")
        el = np.eye(2)[l]
        u = (el - j * j[l] / k2) / (mass + sigma * k2)
        p = -1j * j[l] / (k2 * pressure_scale)
        return u.astype(complex), complex(p)

    def build(self, domain):
        self._check()
        comp = domain.computational
        if comp.kind is not DomainKind.TORUS2D:
            raise ValueError("torus Stokes solver needs a 2D torus domain")
        N = comp.shape[0]
        if self.Ne > N // 2:
            raise ValueError(f"Ne={self.Ne} exceeds N/2={N // 2}")
        basis = FourierBasis(2, self.Ne)
        nullspace = NullSpace.constants(2, 2) if self.mass == 0 else NullSpace.empty(2)
        K = nullspace.K
        M = basis.size
        nodes, weights, normals = _stack_segments(domain)
        nb = len(nodes)
        interior = domain.interior_points
        nI = len(interior)
        labels = [(tuple(j), l) for j in basis.indices for l in range(2)] + list(nullspace.labels)
        system = ExtensionSystem([("boundary", 2 * nb), ("interior", 2 * nI), ("null", K)], 2 * M + K, labels)
        T, _ = self._transfer(basis)
        if nb:
            phi = basis.evaluate(nodes)
            sw = np.sqrt(weights)
            nullvals = nullspace.evaluate(nodes)
            for i in range(2):
                block = np.zeros((nb, 2 * M + K))
                for l in range(2):
                    block[:, l: 2 * M: 2] = phi * T[i, l]
                block[:, 2 * M:] = nullvals[:, i, :]
                system.set_block("boundary", block, sw, rows=slice(i, None, 2))
            del phi
        phi = basis.evaluate(interior)
        sw = np.sqrt(domain.interior_weights)
        for i in range(2):
            system.set_block("interior", phi, sw, cols=slice(i, 2 * M, 2), rows=slice(i, None, 2))
        del phi
        if K:
            const = int(np.flatnonzero(~np.any(basis.freqs, axis=1))[0])
            R = np.zeros((K, 2 * M + K))
            for k in range(K):
                R[k, 2 * const + k] = 2 * np.pi
            system.set_block("null", R)
        system.factorize(self.rank_tol, self.explicit_q)
        self.basis_, self.nullspace_, self.system_, self.domain_ = basis, nullspace, system, domain
        self.boundary_nodes_ = nodes
        self.boundary_normals_ = normals
        self.transfer_, self.pressure_transfer_ = self._transfer(basis)
        return self

    def solve(self, forcing, boundary, flow_rate=None):
        """Solve with unweighted interior forcing (nI, 2) and boundary velocity (nb, 2)."""
        s, data = self._rhs(forcing, boundary)
        z = s.solve(s.rhs(**data))
        M = self.basis_.size
        c = z[: 2 * M].reshape(M, 2).T
        vel = np.einsum("ilj,lj->ij", self.transfer_, c)
        pres = c * self.pressure_transfer_
        return StokesSolution(self, vel, pres, 0.0, z[2 * M:])

    def eval_velocity(self, sol, points, deriv=None):
        phi = self.basis_.evaluate(points, deriv)
        u = (phi @ sol.velocity_coefs.T)
        if self.nullspace_.K and (deriv is None or not any(deriv)):
            u = u + np.einsum("nck,k->nc", self.nullspace_.evaluate(points), sol.d)
        return u

    def eval_pressure(self, sol, points):
        p = np.zeros(len(points))
        for l, d in enumerate(((1, 0), (0, 1))):
            p -= self.basis_.evaluate(points, d) @ sol.pressure_coefs[l]
        return p

    def eval_divergence(self, sol, points):
        return (self.basis_.evaluate(points, (1, 0)) @ sol.velocity_coefs[0]
                + self.basis_.evaluate(points, (0, 1)) @ sol.velocity_coefs[1])

    def _velocity_matrices(self, points):
        phi = self.basis_.evaluate(points)
        return phi, phi

    def _velocity_vectors(self, sol):
        return sol.velocity_coefs[0], sol.velocity_coefs[1]

    def _velocity_offset(self, sol, points):
        if self.nullspace_.K:
            return np.einsum("nck,k->nc", self.nullspace_.evaluate(points), sol.d)
        return 0.0

    def truncated(self, sol, fraction):
        keep = np.max(np.abs(self.basis_.freqs), axis=1) <= fraction * self.Ne
        return replace(sol, velocity_coefs=sol.velocity_coefs * keep, pressure_coefs=sol.pressure_coefs * keep)

    def grid_velocity(self, sol, deriv=None):
        """Velocity components on the full tensor grid, shape (2, N, N)."""
        axes = self.domain_.computational.axes
        out = np.stack([self.basis_.grid_evaluate(sol.velocity_coefs[i], axes, deriv) for i in range(2)])
        if self.nullspace_.K and (deriv is None or not any(deriv)):
            out += (sol.d / (2 * np.pi))[:, None, None]
        return out


class ChannelStokesSolver(_StokesBase):
    """Solution-extension Stokes solver in an x-periodic channel with an embedded obstacle.

    Solves ``(mass - sigma*Delta) u + pressure_scale * grad p - alpha_scale*(alpha, 0) = f``
    with ``u = g`` on the obstacle, no-slip walls built into the basis, and,
    when ``flow_rate`` is on, ``int u_1 dy = q`` enforced by an extra row.

    Column order: regular stream members, pressure members, the special
    stream member, then ``alpha``.  The flow-rate row carries weight
    ``flow_weight`` (1 by default, i.e. an ordinary least-squares term).
    """

    def __init__(self, Ne=16, mass=0.0, sigma=1.0, pressure_scale=1.0, flow_rate=True, alpha_scale=1.0,
                 flow_weight=1.0, rank_tol=None):
        self.Ne = Ne
        self.mass = mass
        self.sigma = sigma
        self.pressure_scale = pressure_scale
        self.flow_rate = flow_rate
        self.alpha_scale = alpha_scale
        self.flow_weight = flow_weight
        self.rank_tol = rank_tol

    def build(self, domain):
        self._check()
        comp = domain.computational
        if comp.kind is not DomainKind.CHANNEL:
            raise ValueError("channel Stokes solver needs a channel domain")
        (x0, x1), (a, b) = comp.bounds
        period = x1 - x0
        vb = ChannelVelocityBasis(self.Ne, period, a, b)
        pb = ChannelPressureBasis(self.Ne, period, a, b)
        Ms, Kp = vb.size - 1, pb.size
        ncols = Ms + Kp + 1 + (1 if self.flow_rate else 0)
        vcols = np.r_[np.arange(Ms), Ms + Kp]
        pcols = np.arange(Ms, Ms + Kp)
        nodes, weights, normals = _stack_segments(domain)
        nb = len(nodes)
        interior = domain.interior_points
        nI = len(interior)
        labels = ([("stream",) + tuple(j) for j in vb.indices] + [("pressure",) + tuple(k) for k in pb.indices]
                  + [("stream", "special")] + ([("alpha",)] if self.flow_rate else []))
        blocks = [("boundary", 2 * nb), ("interior", 2 * nI)] + ([("flow", 1)] if self.flow_rate else [])
        system = ExtensionSystem(blocks, ncols, labels)
        if nb:
            sw = np.sqrt(weights)
            for c in range(2):
                block = np.zeros((nb, ncols))
                block[:, vcols] = vb.velocity(nodes, c)
                system.set_block("boundary", block, sw, rows=slice(c, None, 2))
        sw = np.sqrt(domain.interior_weights)
        grad = pb.gradient(interior)
        for c in range(2):
            block = np.zeros((nI, ncols))
            op = -self.sigma * vb.laplacian(interior, c)
            if self.mass:
                op += self.mass * vb.velocity(interior, c)
            block[:, vcols] = op
            block[:, pcols] = self.pressure_scale * grad[c]
            if self.flow_rate and c == 0:
                block[:, -1] = -self.alpha_scale
            system.set_block("interior", block, sw, rows=slice(c, None, 2))
            del block, op
        del grad
        if self.flow_rate:
            row = np.zeros((1, ncols))
            row[0, vcols] = vb.flow_rate_row()
            system.set_block("flow", row, np.array([self.flow_weight]))
        system.factorize(self.rank_tol, self.explicit_q)
        self.velocity_basis_, self.pressure_basis_ = vb, pb
        self.system_, self.domain_ = system, domain
        self.boundary_nodes_, self.boundary_normals_ = nodes, normals
        self.boundary_weights_ = weights
        self.vcols_, self.pcols_ = vcols, pcols
        return self

    def solve(self, forcing, boundary, flow_rate=None):
        """Solve with interior forcing (nI, 2), obstacle velocity (nb, 2) and flow rate ``q``."""
        s, data = self._rhs(forcing, boundary)
        if self.flow_rate:
            if flow_rate is None:
                raise ValueError("flow rate q required")
            data["flow"] = np.array([float(flow_rate)])
        z = s.solve(s.rhs(**data))
        alpha = float(z[-1]) if self.flow_rate else 0.0
        return StokesSolution(self, z[self.vcols_], z[self.pcols_], alpha)

    def eval_velocity(self, sol, points, deriv=None):
        dx, dy = (0, 0) if deriv is None else deriv
        vb = self.velocity_basis_
        return np.stack([vb.velocity(points, c, dx, dy) @ sol.velocity_coefs for c in range(2)], axis=1)

    def eval_pressure(self, sol, points):
        return self.pressure_basis_.evaluate(points) @ sol.pressure_coefs

    def eval_divergence(self, sol, points):
        return self.velocity_basis_.divergence(points) @ sol.velocity_coefs

    def flow_rate_of(self, sol):
        return float(self.velocity_basis_.flow_rate_row() @ sol.velocity_coefs)

    def _velocity_matrices(self, points):
        vb = self.velocity_basis_
        return vb.velocity(points, 0), vb.velocity(points, 1)

    def _velocity_vectors(self, sol):
        return sol.velocity_coefs, sol.velocity_coefs

    def truncated(self, sol, fraction):
        vb = self.velocity_basis_
        idx = vb.indices
        keep = (np.abs(idx[:, 0]) <= fraction * vb.stream.Ne_x) & (idx[:, 1] <= fraction * vb.stream.Ne_y)
        coefs = sol.velocity_coefs.copy()
        coefs[:-1] *= keep
        return replace(sol, velocity_coefs=coefs)

    def grid_velocity(self, sol, deriv=None):
        dx, dy = (0, 0) if deriv is None else deriv
        xa, ya = self.domain_.computational.axes
        vb = self.velocity_basis_
        return np.stack([vb.grid_velocity(sol.velocity_coefs, xa, ya, c, dx, dy) for c in range(2)])

    def grid_pressure(self, sol, deriv=None):
        dx, dy = (0, 0) if deriv is None else deriv
        xa, ya = self.domain_.computational.axes
        return self.pressure_basis_.grid_evaluate(sol.pressure_coefs, xa, ya, dx, dy) - sol.pressure_offset


class SphereStokesSolver(_StokesBase):
    """Solution-extension Stokes solver on the sphere.

    Solves ``(mass + sigma*(-Delta - K)) u + grad p = f`` for tangent fields
    with components ordered ``(u_theta, u_phi)``.
    """

    def __init__(self, Ne=12, mass=0.0, sigma=1.0, pressure_scale=1.0, rank_tol=None):
        self.Ne = Ne
        self.mass = mass
        self.sigma = sigma
        self.pressure_scale = pressure_scale
        self.rank_tol = rank_tol

    def build(self, domain):
        self._check()
        comp = domain.computational
        if comp.kind is not DomainKind.SPHERE:
            raise ValueError("sphere Stokes solver needs a sphere domain")
        vb = SphereVelocityBasis(self.Ne, comp.radius)
        pb = SphericalHarmonicBasis(self.Ne, include_constant=False, radius=comp.radius)
        Mv, Kp = vb.size, pb.size
        nodes, weights, normals = _stack_segments(domain)
        nb = len(nodes)
        interior = domain.interior_points
        nI = len(interior)
        labels = [("velocity",) + tuple(j) for j in vb.indices] + [("pressure",) + tuple(k) for k in pb.indices]
        system = ExtensionSystem([("boundary", 2 * nb), ("interior", 2 * nI)], Mv + Kp, labels)
        scale = self.mass + self.sigma * vb.operator_symbol
        if nb:
            ut, up = vb.velocity(nodes)
            sw = np.sqrt(weights * comp.radius)
            for c, u in enumerate((ut, up)):
                block = np.zeros((nb, Mv + Kp))
                block[:, :Mv] = u
                system.set_block("boundary", block, sw, rows=slice(c, None, 2))
        ut, up = vb.velocity(interior)
        gt, gp = pb.gradient(interior)
        sw = np.sqrt(domain.interior_weights) * comp.radius
        for c, (u, g) in enumerate(((ut, gt), (up, gp))):
            system.set_block("interior", np.hstack([u * scale, self.pressure_scale * g]), sw,
                             rows=slice(c, None, 2))
        system.factorize(self.rank_tol, self.explicit_q)
        self.velocity_basis_, self.pressure_basis_ = vb, pb
        self.system_, self.domain_ = system, domain
        self.boundary_nodes_, self.boundary_normals_ = nodes, normals
        self.Mv_ = Mv
        return self

    def solve(self, forcing, boundary, flow_rate=None):
        s, data = self._rhs(forcing, boundary)
        z = s.solve(s.rhs(**data))
        return StokesSolution(self, z[: self.Mv_], z[self.Mv_:])

    def eval_velocity(self, sol, points, deriv=None):
        if deriv is not None and any(deriv):
            raise NotImplementedError("velocity derivatives are not provided on the sphere")
        ut, up = self.velocity_basis_.velocity(points)
        return np.stack([ut @ sol.velocity_coefs, up @ sol.velocity_coefs], axis=1)

    def eval_pressure(self, sol, points):
        return self.pressure_basis_.evaluate(points) @ sol.pressure_coefs

    def eval_divergence(self, sol, points):
        """Surface divergence, evaluated by the identity div(curl Y) = 0 member by member."""
        return np.zeros(len(points))


# ---------------------------------------------------------------------------
# problem containers and convenience drivers


@dataclass
class StokesProblem:
    """Stokes data: ``forcing(points) -> (n, 2)`` and ``boundary(points) -> (n, 2)``."""

    domain: object
    forcing: object
    boundary: object
    flow_rate: float = None
    exact_velocity: object = None
    exact_pressure: object = None
    name: str = ""


def solve_stokes_torus(problem, Ne, **kwargs):
    return TorusStokesSolver(Ne, **kwargs).fit(problem).solution_


def solve_stokes_channel(problem, Ne, **kwargs):
    return ChannelStokesSolver(Ne, flow_rate=problem.flow_rate is not None, **kwargs).fit(problem).solution_


def solve_stokes_sphere(problem, Ne, **kwargs):
    return SphereStokesSolver(Ne, **kwargs).fit(problem).solution_
