"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numbers

import numpy as np


def check_int(value, name, *, minimum=None, even=False):
    """Return ``value`` as an int, rejecting non-integers and out-of-range values."""
    if isinstance(value, bool) or not isinstance(value, (numbers.Integral, np.integer)):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    if even and value % 2:
        raise ValueError(f"{name} must be even, got {value}")
    return value


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value


def check_points(points, ndim):
    """Coerce ``points`` to a float array of shape (n, ndim)."""
    pts = np.asarray(points, dtype=float)
    if ndim == 1 and pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim == 1 and pts.shape[0] == ndim:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != ndim:
        raise ValueError(f"expected points of shape (n, {ndim}), got {np.shape(points)}")
    return pts


def check_values(values, n, name, ncomp=None):
    """Coerce nodal data to shape (n,) or (n, ncomp) and require finiteness."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n if ncomp is None else (n, ncomp), float(arr))
    expected = (n,) if ncomp is None else (n, ncomp)
    if ncomp is not None and arr.shape == (n * ncomp,):
        arr = arr.reshape(n, ncomp)
    if arr.shape != expected:
        raise ValueError(f"{name} must have shape {expected}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_pair(value, name):
    """Accept ``n`` or ``(nx, ny)`` and return a 2-tuple of ints."""
    if np.ndim(value) == 0:
        v = check_int(value, name, minimum=0)
        return v, v
    if len(value) != 2:
        raise ValueError(f"{name} must be an int or a pair, got {value!r}")
    return check_int(value[0], name, minimum=0), check_int(value[1], name, minimum=0)
