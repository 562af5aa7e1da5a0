"""Semi-Lagrangian solver for Hamilton-Jacobi-Bellman equations on networks with flux-limited junctions."""

from .hamiltonian import FluxCapacity, Quadratic, QuadraticX, Tabulated
from .network import Grid, GridFunction, Network, build_grid, load_network, load_scenario
from .scheme import SchemeError, SchemeParams, Solver, solve

__version__ = "0.1.0"

__all__ = [
    "FluxCapacity", "Quadratic", "QuadraticX", "Tabulated",
    "Grid", "GridFunction", "Network", "build_grid", "load_network", "load_scenario",
    "SchemeError", "SchemeParams", "Solver", "solve",
]
