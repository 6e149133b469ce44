"""Registry of benchmark problems addressable from experiment configs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import problems


@dataclass(frozen=True)
class Benchmark:
    """One registered benchmark.

    Attributes:
        key: registry key used in configs.
        kind: solver family (``elliptic``, ``heat``, ``stokes``, ``navier_stokes``, ``viscoelastic``).
        description: one-line summary for ``pespec list``.
        builder: callable ``(discretization, params) -> problem``.
        has_exact: whether errors can be measured against an exact solution.
        time_dependent: whether the config needs a ``time`` section.
        defaults: desk-scale config sections.
        paper_defaults: full-resolution config sections (``--paper-scale``), if different.
    """

    key: str
    kind: str
    description: str
    builder: object
    has_exact: bool
    time_dependent: bool = False
    defaults: dict = field(default_factory=dict)
    paper_defaults: dict = None

    def build(self, discretization, params=None):
        return self.builder(discretization, params or {})


def _sweep(lo, hi, step):
    return list(range(lo, hi + 1, step))


def _tail_fit(min_ne=None):
    """Fit window for sweeps that stop before the round-off plateau."""
    return {"plateau_factor": None, "min_ne": min_ne}


def _torus_stokes(variant):
    return lambda d, p: problems.stokes_torus(d["N"], variant)


def _ns_torus(variant):
    return lambda d, p: problems.ns_torus(d["N"], variant)


def _ns_channel(variant):
    return lambda d, p: problems.ns_channel(d["Nx"], d["Ny"], variant, d.get("q", 1.0))


_ENTRIES = [
    Benchmark("poisson1d", "elliptic", "u'' = 1/x on (2, 5) with Dirichlet ends",
              lambda d, p: problems.poisson1d(d["N"]), True,
              defaults={"discretization": {"N": 2 ** 10, "sweep": _sweep(4, 40, 4)}}),
    Benchmark("poisson2d_star", "elliptic", "Poisson on a five-pointed star, u = 1/(x^2 + y^2)",
              lambda d, p: problems.poisson2d_star(d["N"]), True,
              defaults={"discretization": {"N": 2 ** 8, "sweep": _sweep(8, 32, 4)}}),
    Benchmark("poisson2d_mixed", "elliptic", "Poisson on a disc with mixed Dirichlet/Neumann data",
              lambda d, p: problems.poisson2d_mixed(d["N"]), True,
              defaults={"discretization": {"N": 2 ** 8, "sweep": _sweep(8, 32, 4)}}),
    Benchmark("heat1d", "heat", "heat equation on (2, 5), u = ln(x) cos(2 pi t)",
              lambda d, p: problems.heat1d(d["N"]), True, True,
              defaults={"discretization": {"N": 2 ** 8, "sweep": [4, 6, 8, 10, 12, 14]},
                        "time": {"dt": 1e-3, "T": 1.0, "init_policy": "exact"}}),
    Benchmark("heat2d", "heat", "heat equation on a disc, u = ln(x^2 + y^2) cos(2 pi t)",
              lambda d, p: problems.heat2d(d["N"]), True, True,
              defaults={"discretization": {"N": 2 ** 6, "sweep": [4, 8, 12, 16]},
                        "time": {"dt": 1e-3, "T": 0.1, "init_policy": "exact"}}),
    Benchmark("stokes_torus_exact", "stokes", "Stokes on the walled torus with a manufactured solution",
              _torus_stokes("exact"), True,
              defaults={"discretization": {"N": 2 ** 7, "sweep": _sweep(8, 24, 4)}, "mode": "exact"}),
    Benchmark("stokes_torus_forced", "stokes", "Stokes on the walled torus, same forcing, no-slip walls",
              _torus_stokes("forced"), False,
              defaults={"discretization": {"N": 2 ** 7, "sweep": _sweep(8, 24, 4)}, "mode": "successive",
                        "fit": _tail_fit(12)}),
    Benchmark("stokes_torus_inflow", "stokes", "unforced Stokes on the walled torus with inflow/outflow data",
              _torus_stokes("inflow"), False,
              defaults={"discretization": {"N": 2 ** 7, "sweep": _sweep(8, 24, 4)}, "mode": "successive",
                        "fit": _tail_fit(12)}),
    Benchmark("stokes_channel", "stokes", "Stokes past a disc in a periodic channel with unit flow rate",
              lambda d, p: problems.stokes_channel(d["Nx"], d["Ny"], d.get("q", 1.0)), False,
              defaults={"discretization": {"Nx": 2 ** 7, "Ny": 96, "sweep": _sweep(10, 38, 4)},
                        "mode": "successive", "fit": _tail_fit(18)}),
    Benchmark("stokes_sphere", "stokes", "surface Stokes on a sphere minus a polar cap",
              lambda d, p: problems.stokes_sphere(d["Nphi"], d["Ntheta"]), False,
              defaults={"discretization": {"Nphi": 2 ** 6, "Ntheta": 72, "sweep": _sweep(6, 30, 4)},
                        "mode": "successive", "fit": _tail_fit(14)}),
    Benchmark("ns_torus_exact", "navier_stokes", "Navier-Stokes on the walled torus with an exact solution",
              _ns_torus("exact"), True, True,
              defaults={"discretization": {"N": 2 ** 6, "sweep": _sweep(4, 12, 2)},
                        "time": {"dt": 1e-3, "T": 1.0, "init_policy": "exact"}, "mode": "exact"}),
    Benchmark("ns_torus_noslip", "navier_stokes", "Navier-Stokes on the walled torus with no-slip walls",
              _ns_torus("noslip"), False, True,
              defaults={"discretization": {"N": 2 ** 6, "sweep": _sweep(4, 12, 2)},
                        "time": {"dt": 1e-3, "T": 1.0, "init_policy": "backward_euler"}, "mode": "successive",
                        "fit": _tail_fit()}),
    Benchmark("ns_torus_inflow", "navier_stokes", "unforced Navier-Stokes on the walled torus with inflow data",
              _ns_torus("inflow"), False, True,
              defaults={"discretization": {"N": 2 ** 6, "sweep": _sweep(4, 12, 2)},
                        "time": {"dt": 1e-3, "T": 1.0, "init_policy": "backward_euler"}, "mode": "successive",
                        "fit": _tail_fit()}),
    Benchmark("ns_channel_exact", "navier_stokes", "Navier-Stokes in the obstacle channel with an exact solution",
              _ns_channel("exact"), True, True,
              defaults={"discretization": {"Nx": 64, "Ny": 72, "sweep": _sweep(6, 14, 2)},
                        "time": {"dt": 2.5e-4, "T": 1.0, "init_policy": "exact"}, "mode": "exact"}),
    Benchmark("ns_channel_flowrate", "navier_stokes", "Navier-Stokes in the obstacle channel driven by a flow rate",
              _ns_channel("flowrate"), False, True,
              defaults={"discretization": {"Nx": 64, "Ny": 72, "sweep": _sweep(6, 14, 2)},
                        "time": {"dt": 2.5e-4, "T": 1.0, "init_policy": "forward_euler", "init_ratio": 10},
                        "mode": "successive", "fit": _tail_fit()}),
    Benchmark("oldroydb_channel", "viscoelastic", "Oldroyd-B flow past a disc in a channel (Wi = 0.1)",
              None, False, True,
              defaults={"discretization": {"Nx": 128, "Ny": 72, "Ne": [32, 28], "tensor_Ne": [24, 20],
                                           "half_length": float(np.pi)},
                        "time": {"dt": 5e-3, "T": 3.0}, "mode": "successive", "output": {"stride": 20},
                        "params": {"nu_s": 0.59, "nu_p": 0.41, "Wi": 0.1, "q": 4.0}},
              paper_defaults={"discretization": {"Nx": 768, "Ny": 120, "Ne": [240, 40], "tensor_Ne": None,
                                                 "half_length": float(6 * np.pi)},
                              "time": {"dt": 2.5e-3, "T": 3.0}, "mode": "successive", "output": {"stride": 40},
                              "params": {"nu_s": 0.59, "nu_p": 0.41, "Wi": 0.1, "q": 4.0}}),
]

REGISTRY = {b.key: b for b in _ENTRIES}
if len(REGISTRY) != len(_ENTRIES):
    raise RuntimeError("duplicate registry key")


def list_problems():
    """``(key, description)`` pairs in registry order."""
    return [(b.key, b.description) for b in _ENTRIES]
