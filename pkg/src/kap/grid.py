"""Phase-space discretization: velocity lattice, spatial mesh, moments, Maxwellian.

Velocity space is a uniform midpoint lattice on [-v_max, v_max]^2 (2 velocity
dimensions throughout).  With an even number of points the lattice is exactly
symmetric under v -> -v, which makes the discrete momentum of symmetric states
vanish identically and lets specular wall reflection map nodes onto nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidMoments, NonPositiveDensity

BC_PERIODIC = "periodic"
BC_SPECULAR = "specular_reflection"


@dataclass(frozen=True)
class VelocityGrid:
    """Midpoint lattice v_jk = (-v_max + (j+1/2) dv, -v_max + (k+1/2) dv)."""

    n_v: int
    v_max: float = 7.0

    def __post_init__(self):
        if self.n_v % 2 != 0 or self.n_v < 8:
            raise ValueError("n_v must be even and >= 8")
        if self.v_max <= 0:
            raise ValueError("v_max must be positive")
        # (2j+1-n) * (v_max/n): integer*scalar keeps the lattice bitwise symmetric
        nodes = (2 * np.arange(self.n_v) + 1 - self.n_v) * (self.v_max / self.n_v)
        vx, vy = np.meshgrid(nodes, nodes, indexing="ij")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "vx", vx)
        object.__setattr__(self, "vy", vy)
        object.__setattr__(self, "speed_sq", vx**2 + vy**2)

    @property
    def dv(self) -> float:
        return 2.0 * self.v_max / self.n_v

    @property
    def weight(self) -> float:
        """Midpoint quadrature weight, uniform dv^2 per node."""
        return self.dv * self.dv


@dataclass(frozen=True)
class SpatialMesh:
    """Uniform cell-centered mesh on [x_left, x_right]."""

    n_x: int
    x_left: float
    x_right: float
    bc: str = BC_PERIODIC

    def __post_init__(self):
        if self.n_x < 1 or self.x_right <= self.x_left:
            raise ValueError("need n_x >= 1 and x_right > x_left")
        if self.bc not in (BC_PERIODIC, BC_SPECULAR):
            raise ValueError(f"unknown bc {self.bc!r}")
        length = self.x_right - self.x_left
        centers = self.x_left + (np.arange(self.n_x) + 0.5) * (length / self.n_x)
        object.__setattr__(self, "centers", centers)

    @property
    def dx(self) -> float:
        return (self.x_right - self.x_left) / self.n_x


@dataclass
class MacroState:
    """Conserved moments per spatial cell: rho, momentum (2 components), total energy.

    Energy convention for 2 velocity dimensions: E = 1/2 rho |u|^2 + rho T.
    """

    rho: np.ndarray
    momentum: np.ndarray  # shape (n_x, 2)
    energy: np.ndarray

    @classmethod
    def from_primitive(cls, rho, u, T) -> "MacroState":
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        u = np.asarray(u, dtype=float)
        if u.ndim == 1:
            u = np.broadcast_to(u, (rho.size, 2)).copy()
        T = np.broadcast_to(np.asarray(T, dtype=float), rho.shape).copy()
        mom = rho[:, None] * u
        energy = 0.5 * rho * np.sum(u * u, axis=1) + rho * T
        return cls(rho=rho, momentum=mom, energy=energy)

    @property
    def velocity(self) -> np.ndarray:
        return self.momentum / self.rho[:, None]

    @property
    def temperature(self) -> np.ndarray:
        u = self.velocity
        return self.energy / self.rho - 0.5 * np.sum(u * u, axis=1)

    @property
    def pressure(self) -> np.ndarray:
        return self.rho * self.temperature

    def conserved(self) -> np.ndarray:
        """Stacked (rho, mom_x, mom_y, E), shape (n_x, 4)."""
        return np.column_stack([self.rho, self.momentum, self.energy])


def moments(f: np.ndarray, grid: VelocityGrid) -> MacroState:
    """Velocity-space quadrature of (1, v, |v|^2 / 2) against f.

    Raises NonPositiveDensity if any cell has rho <= 0.  Reductions use
    numpy's fixed summation over the velocity axes so the result does not
    depend on thread count.
    """
    f = np.asarray(f)
    if f.ndim == 2:
        f = f[None, :, :]
    w = grid.weight
    rho = w * f.sum(axis=(1, 2))
    if not np.all(np.isfinite(rho)) or np.any(rho <= 0.0):
        raise NonPositiveDensity(f"min cell density {rho.min() if np.all(np.isfinite(rho)) else np.nan}")
    mx = w * np.einsum("ijk,jk->i", f, grid.vx)
    my = w * np.einsum("ijk,jk->i", f, grid.vy)
    energy = 0.5 * w * np.einsum("ijk,jk->i", f, grid.speed_sq)
    return MacroState(rho=rho, momentum=np.column_stack([mx, my]), energy=energy)


def maxwellian(state: MacroState, grid: VelocityGrid) -> np.ndarray:
    """Analytic Gaussian equilibrium sampled at the lattice nodes.

    No discrete-moment correction is applied; quadrature error of the sampled
    Gaussian is the caller's responsibility (negligible once the lattice
    resolves sqrt(T)).
    """
    rho = np.atleast_1d(state.rho)
    T = np.atleast_1d(state.temperature)
    if np.any(rho <= 0.0) or np.any(T <= 0.0) or not np.all(np.isfinite(T)):
        raise InvalidMoments(f"rho range [{rho.min()}, {rho.max()}], T min {T.min()}")
    u = state.velocity
    dx = grid.vx[None, :, :] - u[:, 0, None, None]
    dy = grid.vy[None, :, :] - u[:, 1, None, None]
    T3 = T[:, None, None]
    return rho[:, None, None] / (2.0 * np.pi * T3) * np.exp(-(dx * dx + dy * dy) / (2.0 * T3))
