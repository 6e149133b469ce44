"""Convergence reports, geometric-rate fits and CSV output."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PLATEAU_FACTOR = 100.0
MIN_FIT_POINTS = 3


@dataclass
class RateFit:
    """Least-squares line through ``(Ne, log error)``.

    Attributes:
        a: decay constant, ``error ~ C a^Ne``.
        r2: coefficient of determination of the line.
        window: the ``Ne`` values used.
    """

    a: float
    r2: float
    window: tuple

    def as_dict(self):
        return {"a": self.a, "r2": self.r2, "window": list(self.window)}


def fit_window(ne, err, plateau_factor=PLATEAU_FACTOR, min_ne=None):
    """Mask of points used for the rate fit.

    Points must have a positive error above ``plateau_factor`` times the
    smallest error of the sweep (the plateau) and, if given, ``Ne >= min_ne``.
    ``plateau_factor=None`` keeps every point.
    """
    ne = np.asarray(ne, dtype=float)
    err = np.asarray(err, dtype=float)
    mask = np.isfinite(err) & (err > 0)
    if plateau_factor is not None and np.any(mask):
        mask &= err > plateau_factor * err[mask].min()
    if min_ne is not None:
        mask &= ne >= min_ne
    return mask


def fit_geometric_rate(ne, err, plateau_factor=PLATEAU_FACTOR, min_ne=None):
    """Fit ``error ~ C a^Ne`` over the pre-plateau window.

    Returns:
        A :class:`RateFit`, or ``None`` when fewer than three points qualify.
    """
    ne = np.asarray(ne, dtype=float)
    err = np.asarray(err, dtype=float)
    mask = fit_window(ne, err, plateau_factor, min_ne)
    if np.count_nonzero(mask) < MIN_FIT_POINTS:
        return None
    x, y = ne[mask], np.log(err[mask])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(np.exp(slope)), r2, tuple(int(v) if float(v).is_integer() else float(v) for v in x))


@dataclass
class ConvergenceReport:
    """Rows of ``(Ne, Linf, L2, seconds)`` plus per-norm rate fits.

    Attributes:
        problem: registry key.
        rows: list of ``(Ne, Linf, L2, seconds)``.
        mode: ``"exact"`` (against a reference) or ``"successive"`` (``Ne`` vs the next sweep value).
        extra: optional per-row component errors (dicts).
        fit_options: ``plateau_factor`` and ``min_ne`` used for the fits.
    """

    problem: str
    rows: list = field(default_factory=list)
    mode: str = "exact"
    extra: list = field(default_factory=list)
    fit_options: dict = field(default_factory=lambda: {"plateau_factor": PLATEAU_FACTOR, "min_ne": None})

    COLUMNS = ("Ne", "Linf", "L2", "seconds")

    def column(self, name):
        return np.array([r[self.COLUMNS.index(name)] for r in self.rows], dtype=float)

    def fits(self):
        out = {}
        for norm in ("Linf", "L2"):
            fit = fit_geometric_rate(self.column("Ne"), self.column(norm), **self.fit_options)
            out[norm] = fit.as_dict() if fit else None
        return out

    def summary(self):
        return {"problem": self.problem, "mode": self.mode, "fit_options": self.fit_options, "fits": self.fits(),
                "rows": [dict(zip(self.COLUMNS, r)) for r in self.rows], "components": self.extra}


def _format(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def emit_csv(rows, path, columns):
    """Write a header and rows with 17 significant digits; returns the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_format(v) for v in row])
    return path


def emit_report(report, path):
    return emit_csv(report.rows, path, report.COLUMNS)


def read_csv(path):
    """Parse a file written by :func:`emit_csv` into ``(columns, float array)``."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [[float(v) for v in row] for row in reader]
    return header, np.array(data, dtype=float).reshape(len(data), len(header))
