"""Projection-extension spectral solvers for PDEs on embedded domains."""

from .elliptic import EllipticPESolver, EllipticProblem, compute_error_norms, solve_helmholtz, solve_poisson
from .evolution import HeatStepper, NavierStokesStepper, SolverFailure, TimeGrid
from .extension import ExtensionSystem, RankDeficiencyError, ScalarOperator
from .geometry import PhysicalDomain, build_channel_domain, build_sphere_domain, build_torus_domain
from .stokes import ChannelStokesSolver, SphereStokesSolver, StokesProblem, TorusStokesSolver
from .viscoelastic import OldroydBChannelSolver, OldroydBParams

__version__ = "0.1.0"

__all__ = [
    "ChannelStokesSolver", "EllipticPESolver", "EllipticProblem", "ExtensionSystem", "HeatStepper",
    "NavierStokesStepper", "OldroydBChannelSolver", "OldroydBParams", "PhysicalDomain", "RankDeficiencyError",
    "ScalarOperator", "SolverFailure", "SphereStokesSolver", "StokesProblem", "TimeGrid", "TorusStokesSolver",
    "build_channel_domain", "build_sphere_domain", "build_torus_domain", "compute_error_norms", "solve_helmholtz",
    "solve_poisson",
]
