"""Scalar elliptic problems on embedded domains of the 1D or 2D torus.

Solves ``L u = f`` in the physical region with Dirichlet, Neumann or mixed
boundary data, where ``L = mass*I - sigma*Delta`` has constant coefficients.
Two least-squares formulations are available:

* ``"G"`` extends the forcing: unknowns are Fourier coefficients of ``f_e``
  and boundary traces use ``L^{-1}`` applied mode by mode.  A non-trivial
  kernel of ``L`` on the torus is handled with extra null-space unknowns.
* ``"H"`` extends the solution: unknowns are Fourier coefficients of ``u_e``
  and interior rows use ``L phi_j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_int, check_values
from .basis import FourierBasis
from .extension import (
    ExtensionSystem,
    FieldCoefficients,
    NullSpace,
    ScalarOperator,
    assemble_Q_block,
    assemble_R_S_blocks,
    assemble_theta_columns,
    build_neumann_rows,
    evaluate_field,
    invertible_mask,
)
from .geometry import BCKind, DomainKind


@dataclass
class EllipticProblem:
    """Boundary value problem ``L u = f`` on ``domain``.

    Attributes:
        domain: physical domain (torus-embedded) with Dirichlet/Neumann segments.
        operator: the constant-coefficient operator.
        forcing: ``f(points)``.
        dirichlet: ``g(points)`` for Dirichlet nodes.
        neumann: ``h(points, normals)`` giving the normal derivative on Neumann nodes.
        exact: optional exact solution used for error reporting.
    """

    domain: object
    operator: ScalarOperator
    forcing: object
    dirichlet: object = None
    neumann: object = None
    exact: object = None
    name: str = ""

    def __post_init__(self):
        kinds = {s.kind for s in self.domain.boundary}
        if not kinds <= {BCKind.DIRICHLET, BCKind.NEUMANN}:
            raise ValueError(f"elliptic boundaries must be Dirichlet or Neumann, got {kinds}")
        if self.domain.computational.kind not in (DomainKind.TORUS1D, DomainKind.TORUS2D):
            raise ValueError("elliptic solver needs a torus computational domain")

    def segments(self, kind):
        return [s for s in self.domain.boundary if s.kind is kind]

    def boundary_data(self):
        """Unweighted Dirichlet and Neumann values stacked in row order."""
        g = [self.dirichlet(s.nodes) for s in self.segments(BCKind.DIRICHLET)]
        h = [self.neumann(s.nodes, s.normals) for s in self.segments(BCKind.NEUMANN)]
        cat = lambda parts: np.concatenate(parts) if parts else np.zeros(0)  # noqa: E731
        return cat(g), cat(h)


@dataclass
class EllipticSolution:
    coeffs: FieldCoefficients
    solver: object
    errors: dict = field(default_factory=dict)

    def __call__(self, points):
        return self.solver.predict(points)


def _stack(segments, attr):
    parts = [getattr(s, attr) for s in segments]
    if not parts:
        return None
    return np.concatenate(parts)


class EllipticPESolver(BaseEstimator):
    """Least-squares extension solver for scalar constant-coefficient problems.

    Args:
        Ne: Fourier cutoff; the basis has ``(2 Ne + 1)^d`` members.
        formulation: ``"G"`` (forcing extension) or ``"H"`` (solution extension).
        rank_tol: optional relative pivot threshold for the QR factor.
    """

    def __init__(self, Ne=16, formulation="G", rank_tol=None):
        self.Ne = Ne
        self.formulation = formulation
        self.rank_tol = rank_tol

    def _validate(self, problem):
        check_int(self.Ne, "Ne", minimum=0)
        if self.formulation not in ("G", "H"):
            raise ValueError(f"formulation must be 'G' or 'H', got {self.formulation!r}")
        N = problem.domain.computational.shape[0]
        if self.Ne > N // 2:
            raise ValueError(f"Ne={self.Ne} exceeds the resolvable range N/2={N // 2}")

    def build(self, problem):
        """Assemble and factorize the system for ``problem`` (data independent)."""
        self._validate(problem)
        dom = problem.domain
        comp = dom.computational
        dim = comp.ndim
        op = problem.operator
        basis = FourierBasis(dim, self.Ne)
        if self.formulation == "G" and not np.all(invertible_mask(basis, op)):
            if np.count_nonzero(~invertible_mask(basis, op)) != 1 or op.mass != 0:
                raise ValueError("only a constant kernel is supported")
            nullspace = NullSpace.constants(dim)
        else:
            nullspace = NullSpace.empty()
        dseg = problem.segments(BCKind.DIRICHLET)
        nseg = problem.segments(BCKind.NEUMANN)
        nd = sum(len(s) for s in dseg)
        nn = sum(len(s) for s in nseg)
        interior = dom.interior_points
        K = nullspace.K
        M = basis.size
        labels = [tuple(j) for j in basis.indices] + list(nullspace.labels)
        system = ExtensionSystem(
            [("dirichlet", nd), ("neumann", nn), ("interior", len(interior)), ("null", K)],
            M + K, labels)
        if nd:
            nodes = _stack(dseg, "nodes")
            R, S = assemble_R_S_blocks(basis, nullspace, nodes)
            block = np.hstack([assemble_theta_columns(basis, op, nodes, self.formulation), S])
            system.set_block("dirichlet", block, np.sqrt(_stack(dseg, "weights")))
        if nn:
            rows = np.vstack([build_neumann_rows(basis, op, s, self.formulation) for s in nseg])
            system.set_block("neumann", np.hstack([rows, np.zeros((nn, K))]), np.sqrt(_stack(nseg, "weights")))
        Q = assemble_Q_block(basis, interior, op, self.formulation)
        system.set_block("interior", np.hstack([Q, np.zeros((len(interior), K))]), np.sqrt(dom.interior_weights))
        if K:
            R, _ = assemble_R_S_blocks(basis, nullspace, np.zeros((0, dim)))
            system.set_block("null", np.hstack([R, np.zeros((K, K))]))
        system.factorize(self.rank_tol, getattr(self, "explicit_q", False))
        self.basis_ = basis
        self.operator_ = op
        self.nullspace_ = nullspace
        self.system_ = system
        self.problem_ = problem
        return self

    def solve(self, forcing, dirichlet=None, neumann=None):
        """Re-solve with new unweighted data on the same factorization.

        Args:
            forcing: values at interior nodes.
            dirichlet: values at Dirichlet nodes (segment order).
            neumann: normal derivatives at Neumann nodes.
        """
        s = self.system_
        data = {"interior": check_values(forcing, s.block_rows("interior"), "forcing")}
        if s.block_rows("dirichlet"):
            data["dirichlet"] = check_values(dirichlet, s.block_rows("dirichlet"), "dirichlet data")
        if s.block_rows("neumann"):
            data["neumann"] = check_values(neumann, s.block_rows("neumann"), "neumann data")
        z = s.solve(s.rhs(**data))
        M = self.basis_.size
        self.coef_ = FieldCoefficients(z[:M], z[M:])
        return self.coef_

    def fit(self, problem, y=None):
        """Assemble, factorize and solve ``problem``."""
        self.build(problem)
        g, h = problem.boundary_data()
        self.solve(problem.forcing(problem.domain.interior_points), g, h)
        return self

    def predict(self, points, deriv=None):
        """Extended solution (or its derivative) at arbitrary points of the torus."""
        return evaluate_field(self.coef_, self.basis_, self.operator_, points, self.formulation,
                              self.nullspace_, deriv)

    def predict_forcing(self, points):
        return evaluate_field(self.coef_, self.basis_, self.operator_, points, self.formulation,
                              self.nullspace_, kind="forcing")

    def boundary_deviation(self, dirichlet_values):
        """Max deviation between the solution trace and Dirichlet data."""
        nodes = _stack(self.problem_.segments(BCKind.DIRICHLET), "nodes")
        if nodes is None:
            return 0.0
        return float(np.max(np.abs(self.predict(nodes) - dirichlet_values)))


def compute_error_norms(values, reference, domain):
    """``(Linf, L2)`` of ``values - reference`` over interior nodes of ``domain``.

    Both arguments may be arrays of interior-node values or callables of points.
    """
    pts = domain.interior_points
    v = values(pts) if callable(values) else np.asarray(values, dtype=float)
    r = reference(pts) if callable(reference) else np.asarray(reference, dtype=float)
    e = np.abs(v - r)
    if e.ndim > 1:
        e = np.sqrt(np.sum(e ** 2, axis=tuple(range(1, e.ndim))))
    w = domain.interior_weights
    return {"Linf": float(e.max()) if e.size else 0.0, "L2": float(np.sqrt(np.sum(w * e ** 2)))}


def solve_poisson(problem, Ne, formulation="G", rank_tol=None):
    solver = EllipticPESolver(Ne, formulation, rank_tol).fit(problem)
    sol = EllipticSolution(solver.coef_, solver)
    if problem.exact is not None:
        sol.errors = compute_error_norms(solver.predict, problem.exact, problem.domain)
    return sol


def solve_helmholtz(problem, Ne, formulation="G"):
    if not (problem.operator.sigma > 0 and problem.operator.mass > 0):
        raise ValueError("Helmholtz solve needs mass > 0 and sigma > 0")
    return solve_poisson(problem, Ne, formulation)
