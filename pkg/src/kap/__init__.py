"""kap: penalized IMEX solvers for stiff kinetic equations.

A spectral Boltzmann collision operator penalized by a BGK relaxation term
whose implicit discretization solves in closed form, finite-volume transport,
hydrodynamic reference solvers, a porous-medium drift-diffusion application,
and an experiment harness.
"""

__version__ = "0.1.0"

from .grid import MacroState, SpatialMesh, VelocityGrid, maxwellian, moments  # noqa: F401
