"""Macroscopic reference solvers for validation in 1D.

Compressible Euler with the polytropic constant fixed by the two velocity
dimensions of the kinetic model (gamma = 2, p = rho T), plus its viscous
extension with the relaxation-model transport coefficients mu = kappa = rho T
scaled by eps.  Hyperbolic part: minmod-limited MUSCL reconstruction with a
local Lax-Friedrichs (Rusanov) flux and Heun time stepping; diffusive part:
centered face differences.  An exact Riemann solver provides the shock-tube
oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import VacuumState

GAMMA_GAS = 2.0  # (d_v + 2) / d_v with d_v = 2

BC_PERIODIC = "periodic"
BC_OUTFLOW = "outflow"


@dataclass
class MacroField:
    """Conserved fields (rho, rho u_x, rho u_y, E) on a uniform 1D mesh."""

    rho: np.ndarray
    momentum: np.ndarray  # (n_x, 2)
    energy: np.ndarray

    @classmethod
    def from_primitive(cls, rho, u, T) -> "MacroField":
        rho = np.asarray(rho, dtype=float)
        u = np.asarray(u, dtype=float)
        if u.ndim == 1:
            u = np.column_stack([u, np.zeros_like(u)])
        T = np.asarray(T, dtype=float)
        mom = rho[:, None] * u
        E = 0.5 * rho * np.sum(u * u, axis=1) + rho * T
        return cls(rho=rho.copy(), momentum=mom, energy=E.copy())

    def conserved(self) -> np.ndarray:
        return np.column_stack([self.rho, self.momentum, self.energy])

    @classmethod
    def from_conserved(cls, U: np.ndarray) -> "MacroField":
        return cls(rho=U[:, 0].copy(), momentum=U[:, 1:3].copy(), energy=U[:, 3].copy())

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

    def sound_speed(self) -> np.ndarray:
        return np.sqrt(GAMMA_GAS * self.temperature)

    def validate(self) -> None:
        e_int = self.energy - 0.5 * np.sum(self.momentum**2, axis=1) / self.rho
        if np.any(self.rho <= 0) or np.any(e_int <= 0) or not np.all(np.isfinite(self.energy)):
            raise VacuumState("non-positive density or internal energy")


def _primitive(U: np.ndarray):
    rho = U[:, 0]
    if np.any(rho <= 0) or not np.all(np.isfinite(U)):
        raise VacuumState("non-positive density")
    ux = U[:, 1] / rho
    uy = U[:, 2] / rho
    p = U[:, 3] - 0.5 * rho * (ux * ux + uy * uy)  # (gamma-1) = 1
    if np.any(p <= 0):
        raise VacuumState("non-positive pressure")
    return rho, ux, uy, p


def _flux(U: np.ndarray) -> np.ndarray:
    rho, ux, uy, p = _primitive(U)
    return np.column_stack([rho * ux, rho * ux * ux + p, rho * ux * uy, (U[:, 3] + p) * ux])


def _extend(U: np.ndarray, bc: str) -> np.ndarray:
    if bc == BC_PERIODIC:
        return np.concatenate([U[-2:], U, U[:2]], axis=0)
    return np.concatenate([U[:1], U[:1], U, U[-1:], U[-1:]], axis=0)


def _minmod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return 0.5 * (np.sign(a) + np.sign(b)) * np.minimum(np.abs(a), np.abs(b))


def _hyperbolic_rhs(U: np.ndarray, dx: float, bc: str) -> np.ndarray:
    Ue = _extend(U, bc)
    dU = Ue[1:] - Ue[:-1]
    s = _minmod(dU[:-1], dU[1:])  # slope of extended cell j at s[j-1]
    UL = Ue[1:-2] + 0.5 * s[:-1]
    UR = Ue[2:-1] - 0.5 * s[1:]
    rhoL, uxL, _, pL = _primitive(UL)
    rhoR, uxR, _, pR = _primitive(UR)
    smax = np.maximum(
        np.abs(uxL) + np.sqrt(GAMMA_GAS * pL / rhoL),
        np.abs(uxR) + np.sqrt(GAMMA_GAS * pR / rhoR),
    )
    F = 0.5 * (_flux(UL) + _flux(UR)) - 0.5 * smax[:, None] * (UR - UL)
    return -(F[1:] - F[:-1]) / dx


def _viscous_rhs(U: np.ndarray, dx: float, bc: str, eps: float) -> np.ndarray:
    Ue = _extend(U, bc)[1:-1]  # one ghost layer is enough for centered faces
    rho, ux, uy, p = _primitive(Ue)
    T = p / rho
    mu = rho * T  # relaxation-model viscosity; kappa identical
    dux = (ux[1:] - ux[:-1]) / dx
    duy = (uy[1:] - uy[:-1]) / dx
    dT = (T[1:] - T[:-1]) / dx
    mu_f = 0.5 * (mu[1:] + mu[:-1])
    ux_f = 0.5 * (ux[1:] + ux[:-1])
    uy_f = 0.5 * (uy[1:] + uy[:-1])
    Fv = np.column_stack(
        [
            np.zeros_like(mu_f),
            mu_f * dux,
            mu_f * duy,
            mu_f * (ux_f * dux + uy_f * duy) + mu_f * dT,
        ]
    )
    return eps * (Fv[1:] - Fv[:-1]) / dx


def _rhs(U: np.ndarray, dx: float, bc: str, eps: float) -> np.ndarray:
    out = _hyperbolic_rhs(U, dx, bc)
    if eps != 0.0:
        out += _viscous_rhs(U, dx, bc, eps)
    return out


def ns_step(fieldv: MacroField, dt: float, dx: float, eps: float, bc: str = BC_OUTFLOW) -> MacroField:
    """One Heun step of Euler fluxes plus eps-scaled viscous/heat-flux terms."""
    U = fieldv.conserved()
    U1 = U + dt * _rhs(U, dx, bc, eps)
    U2 = 0.5 * U + 0.5 * (U1 + dt * _rhs(U1, dx, bc, eps))
    out = MacroField.from_conserved(U2)
    out.validate()
    return out


def euler_step(fieldv: MacroField, dt: float, dx: float, bc: str = BC_OUTFLOW) -> MacroField:
    """Inviscid step; identical to ns_step with eps = 0."""
    return ns_step(fieldv, dt, dx, 0.0, bc)


def stable_dt(fieldv: MacroField, dx: float, eps: float = 0.0, cfl: float = 0.9) -> float:
    u = fieldv.velocity
    c = fieldv.sound_speed()
    dt = cfl * dx / float(np.max(np.abs(u[:, 0]) + c))
    if eps > 0.0:
        diff = float(np.max(eps * fieldv.temperature))  # mu/rho = T
        if diff > 0:
            dt = min(dt, 0.4 * dx * dx / diff)
    return dt


def run_macro(
    fieldv: MacroField,
    dx: float,
    t_end: float,
    eps: float = 0.0,
    bc: str = BC_OUTFLOW,
    cfl: float = 0.9,
    output_times=None,
):
    """March to t_end with the CFL-limited step, landing exactly on output times."""
    targets = sorted(output_times) if output_times else [t_end]
    t = 0.0
    out = []
    for target in targets:
        while t < target - 1e-13:
            dt = min(stable_dt(fieldv, dx, eps, cfl), target - t)
            fieldv = ns_step(fieldv, dt, dx, eps, bc)
            t += dt
        out.append((target, fieldv))
    return out


def write_macro_diagnostics(path, x: np.ndarray, fieldv: MacroField, eps: float = 0.0, dx: float | None = None):
    """Diagnostics CSV in the kinetic solver's schema, for direct comparison.

    The heat-flux column carries eps * kappa * dT/dx (kappa = rho T, centered
    differences at output time); the Maxwellian-distance column is zero by
    construction for a macroscopic field.
    """
    from .io import write_diagnostics

    T = fieldv.temperature
    if dx is None:
        dx = float(x[1] - x[0])
    flux = np.zeros((x.size, 2))
    flux[:, 0] = eps * fieldv.rho * T * np.gradient(T, dx)
    write_diagnostics(path, x, fieldv, flux, np.zeros_like(x))


# --- exact Riemann solver (polytropic gas, general gamma) --------------------


def _pressure_fn(p: float, rho_k: float, p_k: float, c_k: float, g: float):
    if p > p_k:
        a = 2.0 / ((g + 1.0) * rho_k)
        b = (g - 1.0) / (g + 1.0) * p_k
        return (p - p_k) * np.sqrt(a / (p + b))
    return 2.0 * c_k / (g - 1.0) * ((p / p_k) ** ((g - 1.0) / (2.0 * g)) - 1.0)


def exact_riemann(left, right, xi, gamma: float = GAMMA_GAS):
    """Self-similar solution (rho, u, T) at xi = x/t for primitive states (rho, u, T)."""
    rho_l, u_l, T_l = (float(v) for v in left)
    rho_r, u_r, T_r = (float(v) for v in right)
    p_l, p_r = rho_l * T_l, rho_r * T_r
    g = gamma
    c_l = np.sqrt(g * p_l / rho_l)
    c_r = np.sqrt(g * p_r / rho_r)

    def total(p):
        return _pressure_fn(p, rho_l, p_l, c_l, g) + _pressure_fn(p, rho_r, p_r, c_r, g) + (u_r - u_l)

    p_hi = max(p_l, p_r)
    while total(p_hi) < 0.0:
        p_hi *= 2.0
    p_star = brentq(total, 1e-14, p_hi, xtol=1e-15, rtol=8.9e-16)
    u_star = 0.5 * (u_l + u_r) + 0.5 * (
        _pressure_fn(p_star, rho_r, p_r, c_r, g) - _pressure_fn(p_star, rho_l, p_l, c_l, g)
    )

    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    rho = np.empty_like(xi)
    u = np.empty_like(xi)
    p = np.empty_like(xi)
    gm, gp = g - 1.0, g + 1.0

    left_side = xi < u_star
    for side, mask in ((0, left_side), (1, ~left_side)):
        if side == 0:
            rho_k, u_k, p_k, c_k, sgn = rho_l, u_l, p_l, c_l, 1.0
        else:
            rho_k, u_k, p_k, c_k, sgn = rho_r, u_r, p_r, c_r, -1.0
        xs = sgn * xi[mask]
        uk = sgn * u_k
        us = sgn * u_star
        if p_star > p_k:  # shock
            s = uk - c_k * np.sqrt(gp / (2 * g) * p_star / p_k + gm / (2 * g))
            pre = xs < s
            rho_star = rho_k * ((p_star / p_k + gm / gp) / (gm / gp * p_star / p_k + 1.0))
            r = np.where(pre, rho_k, rho_star)
            uu = np.where(pre, uk, us)
            pp = np.where(pre, p_k, p_star)
        else:  # rarefaction
            c_star = c_k * (p_star / p_k) ** (gm / (2 * g))
            head, tail = uk - c_k, us - c_star
            r_fan_c = 2.0 / gp * (c_k + gm / 2.0 * (uk - xs))
            u_fan = 2.0 / gp * (c_k + gm / 2.0 * uk + xs)
            rho_fan = rho_k * (r_fan_c / c_k) ** (2.0 / gm)
            p_fan = p_k * (r_fan_c / c_k) ** (2.0 * g / gm)
            rho_star = rho_k * (p_star / p_k) ** (1.0 / g)
            r = np.where(xs < head, rho_k, np.where(xs > tail, rho_star, rho_fan))
            uu = np.where(xs < head, uk, np.where(xs > tail, us, u_fan))
            pp = np.where(xs < head, p_k, np.where(xs > tail, p_star, p_fan))
        rho[mask] = r
        u[mask] = sgn * uu
        p[mask] = pp

    return rho, u, p / rho
