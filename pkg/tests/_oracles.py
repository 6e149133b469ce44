"""Independent reference computations shared by unit and acceptance tests."""

import numpy as np

from pespec.evolution import ebdf3_update
from pespec.viscoelastic import evolution_rhs

FROZEN_GRAD_V = np.array([[0.5, 1.2], [-0.4, -0.5]])
FROZEN_V = np.array([0.3, -0.2])
B0 = np.array([[1.2, 0.3], [0.3, 0.9]])
LAM = 0.5
N_DENSE = 16


def relaxation_rate(b):
    """Square-root conformation rate at one point under a frozen homogeneous flow."""
    out = evolution_rhs(b[None], np.zeros((1, 2, 2, 2)), FROZEN_V[None], FROZEN_GRAD_V[None], LAM)
    return out[0]


def rk4(f, y0, t_end, n):
    """Classical Runge-Kutta reference; returns the states at ``t = k t_end / n``."""
    h = t_end / n
    ys = [y0]
    y = y0
    for _ in range(n):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ys.append(y)
    return ys


def reference_at(times, fine=4096, t_end=1.0):
    """RK4 states at ``times``, which must lie on the ``fine`` grid of ``[0, t_end]``."""
    ys = rk4(relaxation_rate, B0, t_end, fine)
    idx = [t / t_end * fine for t in times]
    if any(abs(i - round(i)) > 1e-9 for i in idx):
        raise ValueError("times are not on the reference grid")
    return [ys[int(round(i))] for i in idx]


def ebdf3_global_error(dt, t_end=1.0):
    """eBDF-3 error at ``t_end`` started from reference values at ``0, dt, 2 dt``."""
    n = int(round(t_end / dt))
    fine = 64 * n
    start = reference_at([0.0, dt, 2 * dt], fine, t_end)
    vals = [start[2], start[1], start[0]]
    rates = [relaxation_rate(v) for v in vals]
    for _ in range(n - 2):
        new = ebdf3_update(vals, rates, dt)
        vals = [new] + vals[:2]
        rates = [relaxation_rate(new)] + rates[:2]
    return float(np.max(np.abs(vals[0] - reference_at([t_end], fine, t_end)[0])))


def ebdf3_local_error(dt):
    """One eBDF-3 step from exact history at ``0, dt, 2 dt``; error at ``3 dt``."""
    exact = reference_at([0.0, dt, 2 * dt, 3 * dt], fine=3 * 4096, t_end=3 * dt)
    vals = [exact[2], exact[1], exact[0]]
    new = ebdf3_update(vals, [relaxation_rate(v) for v in vals], dt)
    return float(np.max(np.abs(new - exact[3])))


def observed_orders(errors):
    e = np.asarray(errors)
    return np.log2(e[:-1] / e[1:])


def fourier_derivative_matrix(n):
    """Dense spectral first-derivative matrix on ``n`` equispaced points (Nyquist mode dropped)."""
    k = np.fft.fftfreq(n, 1.0 / n)
    k[n // 2] = 0.0
    eye = np.eye(n)
    return np.real(np.fft.ifft(1j * k[:, None] * np.fft.fft(eye, axis=0), axis=0))


def dense_periodic_stokes(f, mass, sigma, pscale, n=N_DENSE):
    """Oracle: solve the grid Stokes system with dense linear algebra (zero-mean pressure)."""
    D = fourier_derivative_matrix(n)
    eye = np.eye(n)
    Dx, Dy = np.kron(D, eye), np.kron(eye, D)
    lap = Dx @ Dx + Dy @ Dy
    m = n * n
    Z = np.zeros((m, m))
    L = mass * np.eye(m) - sigma * lap
    A = np.block([[L, Z, pscale * Dx], [Z, L, pscale * Dy], [Dx, Dy, Z]])
    A = np.vstack([A, np.concatenate([np.zeros(2 * m), np.ones(m)])[None]])
    rhs = np.concatenate([f[:, 0], f[:, 1], np.zeros(m), [0.0]])
    if mass == 0:
        for c in range(2):
            row = np.zeros(3 * m)
            row[c * m: (c + 1) * m] = 1.0
            A = np.vstack([A, row[None]])
            rhs = np.append(rhs, 0.0)
    sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
    return sol[:m], sol[m: 2 * m], sol[2 * m:]


def normal_equations_solve(A, w, r):
    """Weighted least squares through the normal equations and a Cholesky factor."""
    Aw = w[:, None] * A
    c = np.linalg.cholesky(Aw.T @ Aw)
    y = np.linalg.solve(c, Aw.T @ (w * r))
    return np.linalg.solve(c.T, y)
