"""Least-squares extension systems.

An :class:`ExtensionSystem` is a dense, row-weighted least-squares matrix made
of named row blocks (boundary traces, interior residuals, null-space
constraints, scalar side conditions).  It is factorized once by Householder QR
and then solved for any number of right-hand sides; the normal equations are
never formed.

Users pass unweighted nodal data; the square roots of the quadrature weights
live inside the system and are applied when the right-hand side is built.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

PEXT_MAGIC = b"PEXT"


class RankDeficiencyError(np.linalg.LinAlgError):
    """Raised when the triangular factor has a (numerically) vanishing pivot."""

    def __init__(self, column, ratio, label=None):
        self.column = column
        self.ratio = ratio
        self.label = label
        where = f"column {column}" + (f" ({label})" if label is not None else "")
        super().__init__(f"rank-deficient extension system at {where}: |R_jj|/max|R_ii| = {ratio:.3e}")


@dataclass
class FieldCoefficients:
    """Coefficients of an extended field.

    Attributes:
        c: basis coefficients.
        d: null-space coefficients (possibly empty).
        aux: named scalar unknowns such as a Lagrange forcing.
    """

    c: np.ndarray
    d: np.ndarray = field(default_factory=lambda: np.zeros(0))
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.d = np.asarray(self.d, dtype=float)


@dataclass(frozen=True)
class ScalarOperator:
    """Constant-coefficient operator ``mass*I - sigma*Delta``.

    On a Fourier mode with wavenumber ``k`` it multiplies by ``mass + sigma*|k|^2``.
    """

    mass: float = 0.0
    sigma: float = 1.0
    name: str = "helmholtz"

    def symbol(self, k2):
        return self.mass + self.sigma * np.asarray(k2, dtype=float)

    @classmethod
    def poisson(cls):
        """``-Delta``."""
        return cls(0.0, 1.0, "poisson")

    @classmethod
    def second_derivative(cls):
        """``+Delta`` (``u''`` in one dimension)."""
        return cls(0.0, -1.0, "laplacian")

    @classmethod
    def helmholtz(cls, sigma, mass=1.0):
        return cls(float(mass), float(sigma), "helmholtz")

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0, "identity")


@dataclass(frozen=True)
class NullSpace:
    """Orthonormal basis of the kernel of the operator on the computational domain.

    ``evaluate(points)`` returns an array (n, ncomp, K).  Members are assumed
    constant, so their gradients vanish.
    """

    K: int
    ncomp: int
    evaluate: object
    labels: tuple = ()

    @classmethod
    def empty(cls, ncomp=1):
        return cls(0, ncomp, lambda p: np.zeros((len(p), ncomp, 0)))

    @classmethod
    def constants(cls, dim, ncomp=1, period=2 * np.pi):
        """Unit-norm constant vectors ``e_k / |Pi|^{1/2}`` on the torus ``[0, period)^dim``."""
        value = 1.0 / np.sqrt(period ** dim)

        def evaluate(points):
            out = np.zeros((len(points), ncomp, ncomp))
            for k in range(ncomp):
                out[:, k, k] = value
            return out

        return cls(ncomp, ncomp, evaluate, tuple(f"null{k}" for k in range(ncomp)))

    def gram(self, points, weights):
        v = self.evaluate(points)
        return np.einsum("nck,ncl,n->kl", v, v, weights)


class ExtensionSystem:
    """Dense weighted least-squares system ``min ||A z - r||`` with named row blocks.

    Args:
        blocks: sequence of ``(name, nrows)`` in row order.
        ncols: number of unknowns.
        column_map: optional label per column.
        keep_matrix: keep an unfactorized copy of ``A`` (tests, debug dumps).
    """

    factorizations = 0

    def __init__(self, blocks, ncols, column_map=None, keep_matrix=False):
        self.ncols = int(ncols)
        self.slices = {}
        start = 0
        for name, n in blocks:
            if name in self.slices:
                raise ValueError(f"duplicate block {name!r}")
            self.slices[name] = slice(start, start + int(n))
            start += int(n)
        self.nrows = start
        self.column_map = list(column_map) if column_map is not None else None
        self.sqrt_weights = {name: np.ones(s.stop - s.start) for name, s in self.slices.items()}
        self.A = np.zeros((self.nrows, self.ncols), order="F")
        self.keep_matrix = keep_matrix
        self.matrix = None
        self._factor = None
        self._q = None
        self.min_diag_ratio = None
        self.n_factorizations = 0
        self._lwork = None

    @property
    def shape(self):
        return self.nrows, self.ncols

    @property
    def factorized(self):
        return self._factor is not None

    def block_rows(self, name):
        return self.slices[name].stop - self.slices[name].start

    def set_block(self, name, matrix, sqrt_weights=None, cols=None, rows=None):
        """Write ``diag(sqrt_weights) @ matrix`` into block ``name``.

        ``rows`` (a slice relative to the block, e.g. ``slice(1, None, 2)`` for
        the second component of node-interleaved data) and ``cols`` restrict
        the target; the weights are remembered for right-hand sides.
        """
        if self.factorized:
            raise RuntimeError("system already factorized")
        s = self.slices[name]
        local = np.arange(s.stop - s.start)[slice(None) if rows is None else rows]
        w = np.ones(local.size) if sqrt_weights is None else np.asarray(sqrt_weights, dtype=float)
        if w.shape != (local.size,):
            raise ValueError(f"block {name!r} expects {local.size} weights, got {w.shape}")
        self.sqrt_weights[name][local] = w
        cols = slice(None) if cols is None else cols
        target = slice(s.start + local[0], s.start + local[-1] + 1, rows.step if rows is not None else None) \
            if local.size else slice(0, 0)
        self.A[target, cols] = w[:, None] * np.asarray(matrix, dtype=float)

    def rhs(self, **data):
        """Weighted right-hand side from unweighted per-block data (missing blocks are zero)."""
        unknown = set(data) - set(self.slices)
        if unknown:
            raise KeyError(f"unknown blocks {sorted(unknown)}")
        first = next((np.asarray(v) for v in data.values() if v is not None), None)
        extra = () if first is None or first.ndim < 2 else first.shape[1:]
        r = np.zeros((self.nrows,) + extra)
        for name, values in data.items():
            if values is None:
                continue
            s = self.slices[name]
            values = np.asarray(values, dtype=float)
            if values.shape[0] != s.stop - s.start:
                raise ValueError(f"block {name!r} expects {s.stop - s.start} rows, got {values.shape[0]}")
            w = self.sqrt_weights[name]
            r[s] = w.reshape((-1,) + (1,) * (values.ndim - 1)) * values
        return r

    def factorize(self, rank_tol=None, explicit_q=False):
        """Householder QR of the assembled matrix (in place).

        A pivot that is exactly zero or non-finite always raises
        :class:`RankDeficiencyError`; ``rank_tol`` additionally rejects pivots
        below ``rank_tol * max|R_ii|``.

        With ``explicit_q`` the thin orthogonal factor is formed once (in the
        same storage), which roughly doubles the factorization cost but turns
        every later solve into a single matrix-vector product.  This pays off
        for time stepping with thousands of single right-hand sides.
        """
        if self.factorized:
            return self
        if self.nrows < self.ncols:
            raise ValueError(f"system is underdetermined: {self.nrows} rows < {self.ncols} columns")
        if not np.all(np.isfinite(self.A)):
            raise ValueError("extension matrix contains non-finite entries")
        if self.keep_matrix:
            self.matrix = np.array(self.A, order="F")
        (h, tau), R = sla.qr(self.A, mode="raw", overwrite_a=True, check_finite=False)
        self.A = None
        diag = np.abs(np.diag(R))
        dmax = diag.max() if diag.size else 1.0
        ratio = diag / dmax if dmax > 0 else np.zeros_like(diag)
        bad = np.flatnonzero(~np.isfinite(diag) | (diag == 0))
        if rank_tol is not None:
            bad = np.union1d(bad, np.flatnonzero(ratio < rank_tol))
        if bad.size:
            col = int(bad[0])
            label = self.column_map[col] if self.column_map else None
            raise RankDeficiencyError(col, float(ratio[col]) if np.isfinite(ratio[col]) else np.nan, label)
        self.min_diag_ratio = float(ratio.min()) if ratio.size else 1.0
        R = np.triu(R[: self.ncols, : self.ncols])
        self._q = None
        if explicit_q:
            q, _, info = lapack.dorgqr(h, tau, lwork=64 * max(self.ncols, 1), overwrite_a=1)
            if info != 0:
                raise np.linalg.LinAlgError(f"dorgqr failed with info={info}")
            h, tau, self._q = None, None, q
        self._factor = (h, tau, R)
        self.n_factorizations += 1
        ExtensionSystem.factorizations += 1
        return self

    def apply_qt(self, r):
        """``Q^T r``; only the leading ``ncols`` rows when ``Q`` is held explicitly."""
        if self._q is not None:
            return self._q.T @ r.reshape(self.nrows, -1)
        h, tau, _ = self._factor
        c = np.asfortranarray(r.reshape(self.nrows, -1), dtype=float)
        if self._lwork is None:
            _, work, _ = lapack.dormqr("L", "T", h, tau, c, -1)
            self._lwork = max(int(work[0]), 1)
        cq, _, info = lapack.dormqr("L", "T", h, tau, c, self._lwork, overwrite_c=1)
        if info != 0:
            raise np.linalg.LinAlgError(f"dormqr failed with info={info}")
        return cq

    def solve(self, r):
        """Least-squares solution for a weighted right-hand side (vector or matrix of columns)."""
        if not self.factorized:
            self.factorize()
        r = np.asarray(r, dtype=float)
        if r.shape[0] != self.nrows:
            raise ValueError(f"rhs has {r.shape[0]} rows, system has {self.nrows}")
        cq = self.apply_qt(r)
        z = sla.solve_triangular(self._factor[2], cq[: self.ncols], check_finite=False)
        return z.reshape((self.ncols,) + r.shape[1:])

    def residual_norm(self, r):
        """``||A z - r||`` at the minimizer, from the trailing part of ``Q^T r``."""
        r = np.asarray(r, dtype=float)
        cq = self.apply_qt(r)
        if self._q is not None:
            return float(np.linalg.norm(r.reshape(self.nrows, -1) - self._q @ cq))
        return float(np.linalg.norm(cq[self.ncols:]))

    def dump(self, directory, r=None, z=None):
        """Write ``A`` (requires ``keep_matrix``), ``r`` and ``z`` as PEXT files."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        if self.matrix is None and self.A is None:
            raise RuntimeError("matrix not retained; build the system with keep_matrix=True")
        write_pext(directory / "A.pext", self.matrix if self.matrix is not None else self.A)
        if r is not None:
            write_pext(directory / "r.pext", np.reshape(r, (len(r), -1)))
        if z is not None:
            write_pext(directory / "z.pext", np.reshape(z, (len(z), -1)))


def write_pext(path, matrix):
    """Row-major little-endian doubles behind a 16-byte header (magic, rows, cols, reserved)."""
    m = np.atleast_2d(np.asarray(matrix, dtype="<f8"))
    if m.ndim != 2:
        raise ValueError("PEXT stores 2-D arrays only")
    rows, cols = m.shape
    with open(path, "wb") as fh:
        fh.write(PEXT_MAGIC + struct.pack("<II", rows, cols) + b"\0" * 4)
        fh.write(np.ascontiguousarray(m).tobytes(order="C"))


def read_pext(path):
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:4] != PEXT_MAGIC:
            raise ValueError(f"{path} is not a PEXT file")
        rows, cols = struct.unpack("<II", header[4:12])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} values, found {data.size}")
    return data.reshape(rows, cols).astype(float)


# ---------------------------------------------------------------------------
# scalar Fourier blocks


def _symbol(basis, operator):
    return operator.symbol(basis.laplacian_symbol)


def invertible_mask(basis, operator):
    """Members on which ``operator`` is invertible (the rest span its kernel)."""
    return _symbol(basis, operator) != 0


def assemble_theta_columns(basis, operator, points, formulation="G", deriv=None):
    """Boundary-trace columns: ``L^{-1} phi_j`` (formulation G) or ``phi_j`` (H) at ``points``.

    Kernel members have no preimage in the range-restricted problem, so their
    G-columns are zero; their contribution is carried by the null-space
    columns instead.
    """
    vals = basis.evaluate(points, deriv)
    if formulation == "H":
        return vals
    if formulation != "G":
        raise ValueError(f"unknown formulation {formulation!r}")
    sym = _symbol(basis, operator)
    inv = np.divide(1.0, sym, out=np.zeros_like(sym), where=sym != 0)
    return vals * inv


def assemble_Q_block(basis, points, operator=None, formulation="G"):
    """Interior-residual columns: ``phi_j`` (G) or ``L phi_j`` (H) at interior nodes."""
    if len(points) == 0:
        raise ValueError("physical domain has no interior nodes")
    vals = basis.evaluate(points)
    if formulation == "H":
        return vals * _symbol(basis, operator)
    return vals


def assemble_R_S_blocks(basis, nullspace, boundary_points, period=2 * np.pi):
    """Null-space coupling: ``R[k, j] = <psi_k, phi_j>`` over the whole torus and ``S = psi_k(s_i)``.

    The torus inner product of a constant with a trigonometric member is exact
    under the trapezoid rule, so it is filled in closed form.
    """
    K = nullspace.K
    R = np.zeros((K, basis.size))
    if K:
        const = ~np.any(basis.freqs, axis=1)
        value = nullspace.evaluate(np.zeros((1, basis.dim)))[0, 0, :]
        R[:, const] = (value * period ** basis.dim)[:, None]
    S = nullspace.evaluate(boundary_points)[:, 0, :] if K else np.zeros((len(boundary_points), 0))
    return R, S


def build_neumann_rows(basis, operator, segment, formulation="G"):
    """Rows ``n . grad theta_j`` (or ``n . grad phi_j``) at the nodes of a Neumann segment."""
    if segment.normals is None:
        raise ValueError("Neumann rows need boundary normals")
    rows = np.zeros((len(segment), basis.size))
    for k in range(basis.dim):
        d = [0] * basis.dim
        d[k] = 1
        rows += segment.normals[:, k: k + 1] * assemble_theta_columns(basis, operator, segment.nodes, formulation, d)
    return rows


def solve_extension(system, g=None, f=None, **blocks):
    """Solve with boundary data ``g`` and interior forcing ``f`` (plus any other named block data)."""
    data = dict(blocks)
    if g is not None:
        data["boundary"] = g
    if f is not None:
        data["interior"] = f
    return system.solve(system.rhs(**data))


def evaluate_field(coeffs, basis, operator, points, formulation="G", nullspace=None, deriv=None, kind="solution"):
    """Evaluate the extended solution (``kind='solution'``) or forcing (``'forcing'``) at ``points``."""
    if kind == "forcing":
        if formulation == "G":
            return basis.evaluate(points, deriv) @ coeffs.c
        vals = basis.evaluate(points, deriv) * _symbol(basis, operator)
        return vals @ coeffs.c
    u = assemble_theta_columns(basis, operator, points, formulation, deriv) @ coeffs.c
    if nullspace is not None and nullspace.K and not (deriv is not None and any(deriv)):
        u = u + nullspace.evaluate(points)[:, 0, :] @ coeffs.d
    return u
