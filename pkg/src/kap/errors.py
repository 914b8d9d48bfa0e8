"""Exception hierarchy shared by all solver modules."""


class KapError(Exception):
    """Base class for all solver errors."""


class NonPositiveDensity(KapError):
    """Moments produced a cell with rho <= 0 (unphysical state or over-large step)."""


class InvalidMoments(KapError):
    """Maxwellian requested for rho <= 0 or T <= 0."""


class SolveFailure(KapError):
    """An implicit stage solve failed."""


class GridMismatch(KapError):
    """Distribution and kernel/grid shapes disagree."""


class QuadratureUnconverged(KapError):
    """Kernel-mode quadrature changed by more than tolerance when refined."""


class VacuumState(KapError):
    """Macroscopic solver hit rho <= 0 or negative internal energy."""


class Overflow(KapError):
    """State norm exceeded the blow-up threshold."""


class LinearSolveFailure(KapError):
    """Sparse linear solve did not reach the requested residual."""


class NegativeMass(KapError):
    """Total mass became negative (should be unreachable with conservative fluxes)."""


class GridIncompatible(KapError):
    """Self-convergence comparison requested between non-nested grids."""


class SchemaMismatch(KapError):
    """Two run directories cannot be compared (fields, meshes or times disagree)."""


class ConfigError(KapError):
    """Experiment configuration file is invalid or incomplete."""
