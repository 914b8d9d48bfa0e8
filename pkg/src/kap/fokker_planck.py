"""Rescaled porous-medium flow df/dt = div_v(v f + grad_v f^m) on a 2D velocity grid.

The stiff linear part div_v(v f + m grad_v(Mb^{m-1} f)), with Mb the
compactly supported equilibrium profile for the run's mass, is discretized
in conservative flux form (upwind drift, centered diffusion) and treated
implicitly; its matrix is time-independent and factorized once.  The
remaining nonlinear part Lap_v(f^m - m Mb^{m-1} f) is explicit with centered
differences, also in flux form, so mass conservation is exact by telescoping.
The explicit remainder's diffusion coefficient m(f^{m-1} - Mb^{m-1}) is
anti-diffusive at most below the implicit part's m Mb^{m-1}, which is what
removes the parabolic dt ~ dv^2 constraint.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import LinearSolveFailure, NegativeMass
from .grid import VelocityGrid


def barenblatt_C(mass: float, m: float) -> float:
    """Closed form for the 2D profile constant: mass = 2 pi C^{m/(m-1)}."""
    if mass <= 0 or m <= 1:
        raise ValueError("need mass > 0 and m > 1")
    return float((mass / (2.0 * np.pi)) ** ((m - 1.0) / m))


@dataclass(frozen=True)
class BarenblattProfile:
    """Equilibrium M(v) = (C - (m-1)/(2m) |v|^2)_+^{1/(m-1)}."""

    m: float
    C: float

    @classmethod
    def from_mass(cls, mass: float, m: float) -> "BarenblattProfile":
        return cls(m=m, C=barenblatt_C(mass, m))

    def power_m1(self, grid: VelocityGrid) -> np.ndarray:
        """M^{m-1} on the lattice (the coefficient entering the implicit operator)."""
        return np.maximum(self.C - (self.m - 1.0) / (2.0 * self.m) * grid.speed_sq, 0.0)

    def evaluate(self, grid: VelocityGrid) -> np.ndarray:
        return self.power_m1(grid) ** (1.0 / (self.m - 1.0))


@dataclass
class PorousState:
    f: np.ndarray
    t: float


def ring_initial(grid: VelocityGrid, n_beams: int = 12, r0: float = 0.25, height: float = 0.1) -> np.ndarray:
    """Indicator rings: balls of radius r0 at radii 1 and 2, n_beams angles each."""
    f = np.zeros((grid.n_v, grid.n_v))
    for radius in (1.0, 2.0):
        for k in range(n_beams):
            th = 2.0 * np.pi * k / n_beams
            cx, cy = radius * np.cos(th), radius * np.sin(th)
            f[(grid.vx - cx) ** 2 + (grid.vy - cy) ** 2 <= r0**2] = height
    return f


class FokkerPlanckSolver:
    """IMEX stepper with the implicit matrix factorized once per (grid, m, mass, dt)."""

    def __init__(self, grid: VelocityGrid, mass: float, dt: float, m: float = 3.0):
        self.grid = grid
        self.m = float(m)
        self.dt = float(dt)
        self.mass = float(mass)
        self.profile = BarenblattProfile.from_mass(mass, self.m)
        self.wm1 = self.profile.power_m1(grid)
        self._matrix = self._assemble()
        A = (sp.identity(grid.n_v**2, format="csc") - dt * self._matrix).tocsc()
        self._A = A
        self._lu = spla.splu(A)

    def _assemble(self) -> sp.csr_matrix:
        """Sparse operator for div(v f + m grad(wm1 f)); no-flux boundary faces."""
        n = self.grid.n_v
        h = self.grid.dv
        v = self.grid.nodes
        m = self.m
        w = self.wm1
        rows, cols, vals = [], [], []

        def add(r, c, val):
            rows.append(r)
            cols.append(c)
            vals.append(val)

        def face(i, j, i2, j2, vf):
            # flux G = vf * f_up + m (w2 f2 - w1 f1)/h on the face between
            # cells 1=(i,j) and 2=(i2,j2); df1/dt += G/h, df2/dt -= G/h.
            # Drift advects inward (speed -v), so the donor cell sits on the
            # far side from the origin.
            a = i * n + j
            b = i2 * n + j2
            up = b if vf > 0 else a
            add(a, up, vf / h)
            add(b, up, -vf / h)
            add(a, b, m * w[i2, j2] / h**2)
            add(a, a, -m * w[i, j] / h**2)
            add(b, b, -m * w[i2, j2] / h**2)
            add(b, a, m * w[i, j] / h**2)

        vf1 = 0.5 * (v[1:] + v[:-1])
        for i in range(n):
            for j in range(n):
                if i < n - 1:
                    face(i, j, i + 1, j, vf1[i])
                if j < n - 1:
                    face(i, j, i, j + 1, vf1[j])
        return sp.csr_matrix((vals, (rows, cols)), shape=(n**2, n**2))

    def explicit_rhs(self, f: np.ndarray) -> np.ndarray:
        """Lap(f^m - m wm1 f) with centered face fluxes, zero at the boundary."""
        h = self.grid.dv
        phi = f**self.m - self.m * self.wm1 * f
        out = np.zeros_like(f)
        gx = (phi[1:, :] - phi[:-1, :]) / h
        out[:-1, :] += gx / h
        out[1:, :] -= gx / h
        gy = (phi[:, 1:] - phi[:, :-1]) / h
        out[:, :-1] += gy / h
        out[:, 1:] -= gy / h
        return out

    def step(self, state: PorousState, dt: float | None = None) -> PorousState:
        if dt is not None and abs(dt - self.dt) > 1e-15 * self.dt:
            raise ValueError("solver factorized for a different dt; build a new solver")
        n = self.grid.n_v
        rhs = (state.f + self.dt * self.explicit_rhs(state.f)).ravel()
        sol = self._lu.solve(rhs)
        scale = float(np.max(np.abs(rhs)))
        resid = float(np.max(np.abs(self._A @ sol - rhs)))
        if resid > 1e-10 * max(scale, 1e-300):
            raise LinearSolveFailure(f"implicit solve residual {resid:.2e}")
        f_new = sol.reshape(n, n)
        if self.grid.weight * f_new.sum() < 0.0:
            raise NegativeMass("total mass went negative")
        return replace(state, f=f_new, t=state.t + self.dt)


def fp_step(state: PorousState, solver: FokkerPlanckSolver) -> PorousState:
    """One IMEX step (explicit nonlinear remainder, implicit linear stiff part)."""
    return solver.step(state)


def _support_gradient(g: np.ndarray, f: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of g with one-sided differences where a neighbor leaves the support of f."""
    out = []
    for axis in (0, 1):
        gm = np.moveaxis(g, axis, 0)
        fm = np.moveaxis(f, axis, 0)
        fwd = np.zeros_like(gm)
        bwd = np.zeros_like(gm)
        fwd[:-1] = (gm[1:] - gm[:-1]) / h
        bwd[1:] = (gm[1:] - gm[:-1]) / h
        has_fwd = np.ones_like(fm, dtype=bool)
        has_bwd = np.ones_like(fm, dtype=bool)
        has_fwd[:-1] = fm[1:] > 0
        has_fwd[-1] = False
        has_bwd[1:] = fm[:-1] > 0
        has_bwd[0] = False
        grad = np.where(
            has_fwd & has_bwd,
            0.5 * (fwd + bwd),
            np.where(has_fwd, fwd, np.where(has_bwd, bwd, 0.0)),
        )
        out.append(np.moveaxis(grad, 0, axis))
    return out[0], out[1]


def entropy(state: PorousState, grid: VelocityGrid, m: float = 3.0) -> tuple[float, float]:
    """Entropy H = int [|v|^2 f + m/(m-1) f^m] and its dissipation integral.

    Dissipation D = int f |v + m/(m-1) grad f^{m-1}|^2 with one-sided
    differences at the support boundary; cells with f = 0 contribute nothing.
    """
    f = state.f
    w = grid.weight
    H = float(w * np.sum(grid.speed_sq * f + m / (m - 1.0) * f**m))
    g = np.where(f > 0, f, 0.0) ** (m - 1.0)
    gx, gy = _support_gradient(g, f, grid.dv)
    c = m / (m - 1.0)
    integrand = f * ((grid.vx + c * gx) ** 2 + (grid.vy + c * gy) ** 2)
    D = float(w * np.sum(np.where(f > 0, integrand, 0.0)))
    return H, D


def rescale_back(state: PorousState, grid: VelocityGrid, t_original: float) -> np.ndarray:
    """Original-variable density g(t, v) = f(log s, v/s) / s with s = sqrt(1 + 2t).

    Evaluated on the same lattice by bilinear interpolation; the 1/s prefactor
    is kept verbatim from the self-similar change of variables, so the 2D mass
    of g is s times the mass of f (measured, not corrected).
    """
    s = float(np.sqrt(1.0 + 2.0 * t_original))
    pts = grid.nodes / s
    idx = np.clip(np.searchsorted(grid.nodes, pts) - 1, 0, grid.n_v - 2)
    lam = (pts - grid.nodes[idx]) / grid.dv
    lam = np.clip(lam, 0.0, 1.0)
    fx0 = state.f[idx, :][:, idx]
    fx1 = state.f[idx + 1, :][:, idx]
    fy0 = state.f[idx, :][:, idx + 1]
    fy1 = state.f[idx + 1, :][:, idx + 1]
    lx = lam[:, None]
    ly = lam[None, :]
    interp = (
        fx0 * (1 - lx) * (1 - ly)
        + fx1 * lx * (1 - ly)
        + fy0 * (1 - lx) * ly
        + fy1 * lx * ly
    )
    return interp / s
