"""Extension bases on the computational domains.

All bases are real-valued.  A complex Fourier pair ``e^{+ij.x}, e^{-ij.x}`` is
represented by ``cos(j.x)`` and ``sin(j.x)``, which keeps every least-squares
system real.  Index order is lexicographic on the multi-index and is shared by
assembly, evaluation and coefficient storage.

Conventions:

* Fourier index ``j``: ``j = 0`` is the constant, ``j`` lexicographically
  positive gives ``cos(j.x)`` and lexicographically negative gives
  ``sin(|j|.x)`` with ``|j| = -j``.
* Channel tensor index ``(j1, j2)``: ``X_{j1}(x) Y_{j2}(y)`` with the same real
  Fourier rule in x and a polynomial factor in y.
* Sphere index ``(l, m)``: orthonormal real harmonics, ``m > 0`` carries
  ``sqrt(2) cos(m phi)`` and ``m < 0`` carries ``sqrt(2) sin(|m| phi)``.
"""

from __future__ import annotations

import enum
import itertools

import numpy as np
from numpy.polynomial import chebyshev as C
from numpy.polynomial import polynomial as Pw
from scipy import special

from ._validation import as_pair, check_int, check_points


class Op(enum.Enum):
    IDENTITY = "identity"
    LAPLACIAN = "laplacian"
    HELMHOLTZ = "helmholtz"
    GRADIENT = "gradient"
    STOKES = "stokes"


# ---------------------------------------------------------------------------
# Fourier


def eval_fourier(j, x, deriv=None):
    """Complex mode ``e^{i j.x}`` or its partial derivative of multi-order ``deriv``."""
    j = np.atleast_1d(np.asarray(j, dtype=float))
    x = check_points(x, j.size)
    val = np.exp(1j * (x @ j))
    if deriv is not None:
        val = val * np.prod((1j * j) ** np.asarray(deriv))
    return val


def fourier_indices(dim, Ne):
    """All multi-indices with ``max |j_i| <= Ne`` in lexicographic order."""
    Ne = check_int(Ne, "Ne", minimum=0)
    return np.array(list(itertools.product(range(-Ne, Ne + 1), repeat=dim)), dtype=int).reshape(-1, dim)


class FourierBasis:
    """Real trigonometric basis on the torus with angular frequency scale ``kappa``.

    Member ``j`` is ``cos(kappa m.x - p*pi/2)`` where ``m`` is ``j`` flipped to
    be lexicographically nonnegative and ``p`` is 1 exactly when ``j`` was
    flipped.
    """

    family = "fourier"

    def __init__(self, dim, Ne, kappa=1.0):
        if dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        self.dim = dim
        self.Ne = check_int(Ne, "Ne", minimum=0)
        self.kappa = float(kappa)
        self.indices = fourier_indices(dim, self.Ne)
        first = np.array([next((v for v in row if v), 0) for row in self.indices])
        self.parity = (first < 0).astype(int)
        self.freqs = np.where(self.parity[:, None] == 1, -self.indices, self.indices)
        self.wavenumbers = self.kappa * self.freqs

    @property
    def size(self):
        return self.indices.shape[0]

    def __len__(self):
        return self.size

    def index_of(self, j):
        j = np.atleast_1d(j)
        pos = 0
        for v in j:
            pos = pos * (2 * self.Ne + 1) + int(v) + self.Ne
        return pos

    @property
    def laplacian_symbol(self):
        """Eigenvalue of ``-Delta`` for every member."""
        return np.sum(self.wavenumbers ** 2, axis=1)

    def evaluate(self, points, deriv=None):
        """Matrix of member values (or partial derivatives) at ``points``, shape (n, size)."""
        x = check_points(points, self.dim)
        phase = x @ self.wavenumbers.T - 0.5 * np.pi * self.parity
        if deriv is None or not any(deriv):
            return np.cos(phase)
        deriv = np.asarray(deriv, dtype=int)
        factor = np.prod(self.wavenumbers ** deriv, axis=1)
        return factor * np.cos(phase + 0.5 * np.pi * deriv.sum())

    def gradient(self, points):
        return np.stack([self.evaluate(points, d) for d in np.eye(self.dim, dtype=int)], axis=-1)

    def to_complex(self, coefs):
        """Complex coefficient array indexed by ``k + Ne`` along each axis."""
        coefs = np.asarray(coefs, dtype=float)
        shape = (2 * self.Ne + 1,) * self.dim
        out = np.zeros(shape, dtype=complex)
        pos = tuple((self.freqs + self.Ne).T)
        neg = tuple((-self.freqs + self.Ne).T)
        cos_part = np.where(self.parity == 0, coefs, 0.0)
        sin_part = np.where(self.parity == 1, coefs, 0.0)
        zero = ~np.any(self.freqs, axis=1)
        np.add.at(out, pos, np.where(zero, cos_part, 0.5 * cos_part) - 0.5j * sin_part)
        np.add.at(out, neg, np.where(zero, 0.0, 0.5 * cos_part) + 0.5j * sin_part)
        return out

    def grid_evaluate(self, coefs, axes, deriv=None):
        """Evaluate the expansion on a tensor grid; returns an array of shape ``[len(a) for a in axes]``."""
        chat = self.to_complex(coefs)
        k = self.kappa * np.arange(-self.Ne, self.Ne + 1)
        deriv = (0,) * self.dim if deriv is None else tuple(deriv)
        mats = [np.exp(1j * np.multiply.outer(np.asarray(ax, dtype=float), k)) * (1j * k) ** d
                for ax, d in zip(axes, deriv)]
        if self.dim == 1:
            return (mats[0] @ chat).real
        return (mats[0] @ chat @ mats[1].T).real


# ---------------------------------------------------------------------------
# Chebyshev


class ChebyshevAxis:
    """Affine map of ``[a, b]`` onto ``[-1, 1]`` with Chebyshev series helpers."""

    def __init__(self, a, b):
        if not a < b:
            raise ValueError("Chebyshev interval requires a < b")
        self.a, self.b = float(a), float(b)
        self.scale = 2.0 / (self.b - self.a)

    def to_reference(self, y):
        return (2.0 * np.asarray(y, dtype=float) - self.a - self.b) / (self.b - self.a)

    def series_values(self, coef, y, deriv=0):
        """Values of Chebyshev series (columns of ``coef``) at ``y``; shape (n, ncols)."""
        coef = np.asarray(coef, dtype=float)
        if deriv:
            coef = C.chebder(coef, deriv, scl=self.scale, axis=0) if coef.shape[0] > deriv else np.zeros(
                (1,) + coef.shape[1:])
        V = C.chebvander(self.to_reference(y), coef.shape[0] - 1)
        return V @ coef


def eval_chebyshev(n, y, a=-1.0, b=1.0, deriv=0):
    """``T_n`` composed with the affine map of ``[a, b]`` onto ``[-1, 1]``, or its y-derivative."""
    n = check_int(n, "n", minimum=0)
    ax = ChebyshevAxis(a, b)
    c = np.zeros((n + 1, 1))
    c[n, 0] = 1.0
    out = ax.series_values(c, np.atleast_1d(y), deriv)[:, 0]
    return out if np.ndim(y) else float(out[0])


def wall_weight_series(a, b):
    """Chebyshev coefficients (reference variable) of ``(y - a)^2 (y - b)^2``."""
    half = 0.5 * (b - a)
    return C.poly2cheb(half ** 4 * np.array([1.0, 0.0, -2.0, 0.0, 1.0]))


def special_stream_series(a, b):
    """Chebyshev coefficients of the cubic with zero value at the centre and zero slope at both walls.

    It is ``int_c^y 3 (s - a)(s - b) ds`` with ``c`` the interval midpoint,
    which is ``y (y^2 - 12)`` on ``[-2, 2]``.
    """
    half = 0.5 * (b - a)
    # in the reference variable t: 3 (s-a)(s-b) ds = 3 half^3 (t^2 - 1) dt
    integrand = 3.0 * half ** 3 * np.array([-1.0, 0.0, 1.0])
    return C.poly2cheb(Pw.polyint(integrand))


class TensorChannelBasis:
    """Products ``X_{j1}(x) Y_{j2}(y)`` of real Fourier modes in x and polynomials in y.

    ``y_series[:, k]`` holds the Chebyshev coefficients (reference variable)
    of ``Y_k``.  Indices are ``(j1, j2)`` with ``|j1| <= Ne_x`` and
    ``0 <= j2 <= Ne_y`` in lexicographic order, minus ``exclude``.
    """

    def __init__(self, Ne, period, y_lo, y_hi, y_series, exclude=()):
        self.Ne_x, self.Ne_y = as_pair(Ne, "Ne")
        self.period = float(period)
        self.xbasis = FourierBasis(1, self.Ne_x, 2 * np.pi / self.period)
        self.yaxis = ChebyshevAxis(y_lo, y_hi)
        self.y_series = np.asarray(y_series, dtype=float)
        if self.y_series.shape[1] != self.Ne_y + 1:
            raise ValueError("need one y-factor per Chebyshev degree")
        idx = [(j1, j2) for j1 in range(-self.Ne_x, self.Ne_x + 1) for j2 in range(self.Ne_y + 1)
               if (j1, j2) not in set(exclude)]
        self.indices = np.array(idx, dtype=int).reshape(-1, 2)
        self._xcol = self.indices[:, 0] + self.Ne_x
        self._ycol = self.indices[:, 1]

    @property
    def size(self):
        return self.indices.shape[0]

    def __len__(self):
        return self.size

    def factors(self, x, y, dx=0, dy=0):
        X = self.xbasis.evaluate(np.asarray(x, dtype=float)[:, None], (dx,))
        Y = self.yaxis.series_values(self.y_series, y, dy)
        return X, Y

    def evaluate(self, points, dx=0, dy=0):
        """Matrix (n, size) of ``d^dx/dx d^dy/dy`` of every member."""
        p = check_points(points, 2)
        X, Y = self.factors(p[:, 0], p[:, 1], dx, dy)
        return X[:, self._xcol] * Y[:, self._ycol]

    def coefficient_grid(self, coefs):
        grid = np.zeros((2 * self.Ne_x + 1, self.Ne_y + 1))
        grid[self._xcol, self._ycol] = coefs
        return grid

    def grid_evaluate(self, coefs, x_axis, y_axis, dx=0, dy=0):
        """Expansion on the tensor grid ``x_axis`` by ``y_axis`` (shape (Nx, Ny))."""
        X, Y = self.factors(x_axis, y_axis, dx, dy)
        return X @ self.coefficient_grid(coefs) @ Y.T


def chebyshev_identity_series(Ne_y):
    return np.eye(Ne_y + 1)


class ChannelPressureBasis(TensorChannelBasis):
    """``X_{k1}(x) T_{k2}(y)``; the constant is dropped unless ``include_constant``."""

    family = "channel_pressure"

    def __init__(self, Ne, period=2 * np.pi, y_lo=-2.0, y_hi=2.0, include_constant=False):
        ne_x, ne_y = as_pair(Ne, "Ne")
        exclude = () if include_constant else ((0, 0),)
        super().__init__((ne_x, ne_y), period, y_lo, y_hi, chebyshev_identity_series(ne_y), exclude)
        self.include_constant = include_constant

    def gradient(self, points):
        return self.evaluate(points, 1, 0), self.evaluate(points, 0, 1)


def build_channel_pressure_basis(Ne, period=2 * np.pi, y_lo=-2.0, y_hi=2.0, include_constant=False):
    return ChannelPressureBasis(Ne, period, y_lo, y_hi, include_constant)


class ChannelVelocityBasis:
    """Divergence-free velocities ``(d_y phi, -d_x phi)`` with no-slip walls built in.

    The stream functions are ``X_{j1}(x) T_{j2}(y) (y - a)^2 (y - b)^2`` plus one
    special cubic in y (last column) whose velocity ``(phi~'(y), 0)`` has zero
    trace on both walls and carries the net flow rate.
    """

    family = "channel_velocity"

    def __init__(self, Ne, period=2 * np.pi, y_lo=-2.0, y_hi=2.0):
        ne_x, ne_y = as_pair(Ne, "Ne")
        w = wall_weight_series(y_lo, y_hi)
        series = np.zeros((ne_y + 5, ne_y + 1))
        for k in range(ne_y + 1):
            tk = np.zeros(k + 1)
            tk[k] = 1.0
            prod = C.chebmul(tk, w)
            series[: prod.size, k] = prod
        self.stream = TensorChannelBasis((ne_x, ne_y), period, y_lo, y_hi, series)
        self.special = special_stream_series(y_lo, y_hi)[:, None]
        self.yaxis = self.stream.yaxis
        self.y_lo, self.y_hi = float(y_lo), float(y_hi)

    @property
    def size(self):
        return self.stream.size + 1

    def __len__(self):
        return self.size

    @property
    def indices(self):
        return self.stream.indices

    def stream_derivative(self, points, dx=0, dy=0):
        """``d^dx/dx d^dy/dy`` of all stream functions (special one last), shape (n, size)."""
        p = check_points(points, 2)
        out = np.empty((p.shape[0], self.size))
        out[:, :-1] = self.stream.evaluate(p, dx, dy)
        out[:, -1] = 0.0 if dx else self.yaxis.series_values(self.special, p[:, 1], dy)[:, 0]
        return out

    def velocity(self, points, comp, dx=0, dy=0):
        """Partial derivative of velocity component ``comp`` of every member."""
        if comp == 0:
            return self.stream_derivative(points, dx, dy + 1)
        return -self.stream_derivative(points, dx + 1, dy)

    def laplacian(self, points, comp):
        return self.velocity(points, comp, 2, 0) + self.velocity(points, comp, 0, 2)

    def divergence(self, points):
        return self.velocity(points, 0, 1, 0) + self.velocity(points, 1, 0, 1)

    def special_value(self, y, deriv=0):
        return self.yaxis.series_values(self.special, np.atleast_1d(y), deriv)[:, 0]

    def flow_rate_row(self):
        """Contribution of each member to ``int u_1 dy`` across the channel."""
        row = np.zeros(self.size)
        row[-1] = self.special_value(self.y_hi)[0] - self.special_value(self.y_lo)[0]
        return row

    def grid_stream(self, coefs, x_axis, y_axis, dx=0, dy=0):
        coefs = np.asarray(coefs, dtype=float)
        out = self.stream.grid_evaluate(coefs[:-1], x_axis, y_axis, dx, dy)
        if not dx:
            out = out + coefs[-1] * self.special_value(y_axis, dy)[None, :]
        return out

    def grid_velocity(self, coefs, x_axis, y_axis, comp, dx=0, dy=0):
        if comp == 0:
            return self.grid_stream(coefs, x_axis, y_axis, dx, dy + 1)
        return -self.grid_stream(coefs, x_axis, y_axis, dx + 1, dy)


def build_channel_velocity_basis(Ne, y_lo=-2.0, y_hi=2.0, period=2 * np.pi):
    return ChannelVelocityBasis(Ne, period, y_lo, y_hi)


# ---------------------------------------------------------------------------
# Sphere


def eval_spherical_harmonic(l, m, theta, phi):
    """``e^{i m phi} P_l^{|m|}(cos theta)`` with unnormalized Legendre functions and no Condon-Shortley sign."""
    l = check_int(l, "l", minimum=0)
    m = check_int(m, "m")
    if abs(m) > l:
        raise ValueError(f"|m| must not exceed l, got l={l}, m={m}")
    p = special.lpmv(abs(m), l, np.cos(theta)) * (-1.0) ** abs(m)
    return np.exp(1j * m * np.asarray(phi)) * p


def normalized_legendre_table(Ne, theta):
    """Orthonormal associated Legendre values and theta-derivatives.

    Returns ``P, dP`` of shape (Ne+1, Ne+1, n) indexed ``[l, m]`` (zero for
    ``m > l``), normalized so that ``P_l^m(cos theta) cos(m phi) sqrt(2)`` is
    orthonormal on the unit sphere for m > 0.  Computed with the standard
    stable recurrences in l at fixed m.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    x, s = np.cos(theta), np.sin(theta)
    n = theta.size
    P = np.zeros((Ne + 1, Ne + 1, n))
    P[0, 0] = 1.0 / np.sqrt(4 * np.pi)
    for m in range(1, Ne + 1):
        P[m, m] = np.sqrt((2 * m + 1) / (2.0 * m)) * s * P[m - 1, m - 1]
    for m in range(0, Ne):
        P[m + 1, m] = np.sqrt(2 * m + 3.0) * x * P[m, m]
    for m in range(0, Ne + 1):
        for l in range(m + 2, Ne + 1):
            a = np.sqrt((4.0 * l * l - 1) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1) ** 2 - 1))
            P[l, m] = a * (x * P[l - 1, m] - b * P[l - 2, m])
    dP = np.zeros_like(P)
    with np.errstate(divide="ignore", invalid="ignore"):
        for l in range(1, Ne + 1):
            for m in range(0, l + 1):
                c = np.sqrt((2.0 * l + 1) / (2 * l - 1) * (l * l - m * m))
                prev = P[l - 1, m] if m <= l - 1 else 0.0
                dP[l, m] = (l * x * P[l, m] - c * prev) / s
    return P, dP


def sphere_indices(Ne, include_constant=True):
    idx = [(l, m) for l in range(Ne + 1) for m in range(-l, l + 1)]
    if not include_constant:
        idx = idx[1:]
    return np.array(idx, dtype=int).reshape(-1, 2)


class SphericalHarmonicBasis:
    """Orthonormal real spherical harmonics ``(l, m)`` with ``l <= Ne`` on a sphere of given radius."""

    family = "spherical_harmonic"

    def __init__(self, Ne, include_constant=True, radius=1.0):
        self.Ne = check_int(Ne, "Ne", minimum=0)
        self.radius = float(radius)
        self.indices = sphere_indices(self.Ne, include_constant)

    @property
    def size(self):
        return self.indices.shape[0]

    def __len__(self):
        return self.size

    @property
    def laplacian_symbol(self):
        l = self.indices[:, 0]
        return l * (l + 1) / self.radius ** 2

    def tables(self, points):
        """Values, theta-derivatives and ``(1/sin theta) d/dphi`` of every member, each (n, size)."""
        p = check_points(points, 2)
        theta, phi = p[:, 0], p[:, 1]
        P, dP = normalized_legendre_table(self.Ne, theta)
        l, m = self.indices[:, 0], self.indices[:, 1]
        am = np.abs(m)
        Plm = P[l, am].T
        dPlm = dP[l, am].T
        mphi = np.outer(phi, am)
        trig = np.where(m > 0, np.cos(mphi), np.where(m < 0, np.sin(mphi), 1.0))
        dtrig = np.where(m > 0, -am * np.sin(mphi), np.where(m < 0, am * np.cos(mphi), 0.0))
        norm = np.where(m == 0, 1.0, np.sqrt(2.0))
        s = np.sin(theta)[:, None]
        Y = norm * Plm * trig
        Yt = norm * dPlm * trig
        Yp = norm * (Plm / s) * dtrig
        return Y, Yt, Yp

    def evaluate(self, points):
        return self.tables(points)[0]

    def gradient(self, points):
        """Surface gradient components ``(theta-hat, phi-hat)``."""
        _, Yt, Yp = self.tables(points)
        return Yt / self.radius, Yp / self.radius


class SphereVelocityBasis:
    """Tangent fields ``d_theta Y phi-hat - (1/sin theta) d_phi Y theta-hat`` for ``1 <= l <= Ne``.

    Components are returned in the order ``(u_theta, u_phi)``.  The operator
    ``-Delta - K`` with the Hodge vector Laplacian acts on member ``(l, m)`` as
    multiplication by ``(l(l+1) - 1) / radius^2``.
    """

    family = "sphere_velocity"

    def __init__(self, Ne, radius=1.0):
        self.harmonics = SphericalHarmonicBasis(Ne, include_constant=False, radius=radius)
        self.radius = float(radius)
        self.Ne = self.harmonics.Ne

    @property
    def indices(self):
        return self.harmonics.indices

    @property
    def size(self):
        return self.harmonics.size

    def __len__(self):
        return self.size

    @property
    def operator_symbol(self):
        l = self.indices[:, 0]
        return (l * (l + 1) - 1.0) / self.radius ** 2

    def velocity(self, points):
        _, Yt, Yp = self.harmonics.tables(points)
        return -Yp, Yt


def build_sphere_velocity_basis(Ne, radius=1.0):
    return SphereVelocityBasis(Ne, radius)


# ---------------------------------------------------------------------------
# operator images


def operator_image(basis, op, sigma=0.0, mass=1.0):
    """Callable ``points -> values`` of ``op`` applied to every member of ``basis``.

    ``HELMHOLTZ`` is ``mass*I - sigma*Delta``; ``LAPLACIAN`` is ``Delta``.
    Vector-valued images return a tuple of component matrices.
    """
    op = Op(op)
    if op is Op.IDENTITY:
        if isinstance(basis, ChannelVelocityBasis):
            return lambda p: (basis.velocity(p, 0), basis.velocity(p, 1))
        if isinstance(basis, SphereVelocityBasis):
            return basis.velocity
        return basis.evaluate
    if isinstance(basis, FourierBasis):
        sym = basis.laplacian_symbol
        if op is Op.LAPLACIAN:
            return lambda p: -sym * basis.evaluate(p)
        if op is Op.HELMHOLTZ:
            return lambda p: (mass + sigma * sym) * basis.evaluate(p)
        if op is Op.GRADIENT:
            return lambda p: tuple(basis.gradient(p)[..., k] for k in range(basis.dim))
    if isinstance(basis, TensorChannelBasis):
        if op is Op.LAPLACIAN:
            return lambda p: basis.evaluate(p, 2, 0) + basis.evaluate(p, 0, 2)
        if op is Op.HELMHOLTZ:
            return lambda p: mass * basis.evaluate(p) - sigma * (basis.evaluate(p, 2, 0) + basis.evaluate(p, 0, 2))
        if op is Op.GRADIENT:
            return lambda p: (basis.evaluate(p, 1, 0), basis.evaluate(p, 0, 1))
    if isinstance(basis, ChannelVelocityBasis):
        if op is Op.LAPLACIAN:
            return lambda p: (basis.laplacian(p, 0), basis.laplacian(p, 1))
        if op is Op.STOKES:
            return lambda p: (-basis.laplacian(p, 0), -basis.laplacian(p, 1))
        if op is Op.HELMHOLTZ:
            return lambda p: tuple(mass * basis.velocity(p, c) - sigma * basis.laplacian(p, c) for c in (0, 1))
    if isinstance(basis, SphericalHarmonicBasis):
        if op is Op.LAPLACIAN:
            return lambda p: -basis.laplacian_symbol * basis.evaluate(p)
        if op is Op.GRADIENT:
            return basis.gradient
    if isinstance(basis, SphereVelocityBasis) and op is Op.STOKES:
        def image(p):
            ut, up = basis.velocity(p)
            return basis.operator_symbol * ut, basis.operator_symbol * up
        return image
    raise ValueError(f"operator {op.value} is not available for {type(basis).__name__}")
