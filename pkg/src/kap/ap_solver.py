"""Penalized IMEX stepping for the kinetic equation df/dt + v.grad_x f = Q(f)/eps.

Transport is explicit (second-order MUSCL finite volume with minmod slopes),
the collision remainder Q - P is explicit, and the relaxation penalty P is
implicit with its closed-form solve.  The macroscopic moments after a step
follow from the transported distribution alone, since Q and P carry no
moments analytically; that explicit moment update defines the Maxwellian
entering the implicit solve, so no nonlinear iteration is ever needed.

The second-order scheme places transport in the explicit slot of both stages
(half-step predictor, midpoint corrector) and treats the penalty with the
trapezoidal rule.  The stage Maxwellian and rate of the predictor are reused
in the corrector's explicit penalty term; they are defined by the same stage
moment update.

Knudsen number, penalty rate and all implicit algebra are per spatial cell,
so spatially varying regimes need no special casing.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .collision import KernelModes, PenaltyConfig, bgk_implicit_solve, boltzmann_spectral
from .errors import Overflow
from .grid import BC_PERIODIC, MacroState, SpatialMesh, VelocityGrid, maxwellian, moments
from .kernels import muscl_rhs

OVERFLOW_THRESHOLD = 1e10


@dataclass(frozen=True)
class KnudsenField:
    """Per-cell Knudsen number eps_i > 0."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(v <= 0) or not np.all(np.isfinite(v)):
            raise ValueError("Knudsen field must be positive and finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, mesh: SpatialMesh, eps0: float) -> "KnudsenField":
        return cls(np.full(mesh.n_x, float(eps0)))

    @classmethod
    def mixing(cls, mesh: SpatialMesh, eps0: float) -> "KnudsenField":
        """eps(x) = eps0 + [tanh(1 - 11 x) + tanh(1 + 11 x)] / 2, smooth kinetic pocket."""
        x = mesh.centers
        return cls(eps0 + 0.5 * (np.tanh(1.0 - 11.0 * x) + np.tanh(1.0 + 11.0 * x)))


@dataclass(frozen=True)
class KineticProblem:
    mesh: SpatialMesh
    vgrid: VelocityGrid
    knudsen: KnudsenField
    penalty: PenaltyConfig
    modes: KernelModes

    def __post_init__(self):
        if self.knudsen.values.shape != (self.mesh.n_x,):
            raise ValueError("Knudsen field length != n_x")
        if self.modes.n_v != self.vgrid.n_v:
            raise ValueError("kernel modes built for a different n_v")


@dataclass
class KineticState:
    f: np.ndarray
    t: float
    problem: KineticProblem


@dataclass
class StepInfo:
    """Per-step bookkeeping used by the conservation checks."""

    moments_in: MacroState | None = None
    macro_update: MacroState | None = None


def ghost_extend(f: np.ndarray, mesh: SpatialMesh) -> np.ndarray:
    """Two ghost layers per side; specular walls flip the v_x axis of the mirror cell."""
    if mesh.bc == BC_PERIODIC:
        return np.concatenate([f[-2:], f, f[:2]], axis=0)
    fe = np.empty((f.shape[0] + 4,) + f.shape[1:], dtype=f.dtype)
    fe[2:-2] = f
    fe[1] = f[0, ::-1, :]
    fe[0] = f[1, ::-1, :]
    fe[-2] = f[-1, ::-1, :]
    fe[-1] = f[-2, ::-1, :]
    return fe


def transport_rhs(f: np.ndarray, mesh: SpatialMesh, vgrid: VelocityGrid) -> np.ndarray:
    """-v_x df/dx, MUSCL upwind with minmod-limited linear reconstruction."""
    return muscl_rhs(ghost_extend(f, mesh), vgrid.nodes, mesh.dx)


def _per_cell(a: np.ndarray) -> np.ndarray:
    return a[:, None, None]


def ap_step1(state: KineticState, dt: float) -> tuple[KineticState, StepInfo]:
    """First-order penalized IMEX step."""
    pb = state.problem
    f = state.f
    vg = pb.vgrid
    eps = pb.knudsen.values

    U_n = moments(f, vg)
    M_n = maxwellian(U_n, vg)
    beta_n = pb.penalty.beta(U_n.rho)
    Qf = boltzmann_spectral(f, pb.modes)
    Pf = _per_cell(beta_n) * (M_n - f)

    f_t = f + dt * transport_rhs(f, pb.mesh, vg)
    U_next = moments(f_t, vg)
    M_next = maxwellian(U_next, vg)
    beta_next = pb.penalty.beta(U_next.rho)

    f_new = bgk_implicit_solve(f_t, M_next, beta_next, eps, dt)
    f_new += dt * (Qf - Pf) / (_per_cell(eps) + _per_cell(beta_next) * dt)
    return replace(state, f=f_new, t=state.t + dt), StepInfo(moments_in=U_n, macro_update=U_next)


def ap_step2(state: KineticState, dt: float) -> tuple[KineticState, StepInfo]:
    """Second-order penalized IMEX step (half-step predictor + midpoint/trapezoid)."""
    pb = state.problem
    f = state.f
    vg = pb.vgrid
    eps = _per_cell(pb.knudsen.values)

    U_n = moments(f, vg)
    M_n = maxwellian(U_n, vg)
    beta_n = _per_cell(pb.penalty.beta(U_n.rho))
    Qn = boltzmann_spectral(f, pb.modes)
    Pn = beta_n * (M_n - f)

    half = 0.5 * dt
    f_t1 = f + half * transport_rhs(f, pb.mesh, vg)
    U_s = moments(f_t1, vg)
    M_s = maxwellian(U_s, vg)
    beta_s = _per_cell(pb.penalty.beta(U_s.rho))
    f_star = (eps * f_t1 + half * (Qn - Pn) + beta_s * half * M_s) / (eps + beta_s * half)

    Qs = boltzmann_spectral(f_star, pb.modes)
    Ps = beta_s * (M_s - f_star)

    f_t2 = f + dt * transport_rhs(f_star, pb.mesh, vg)
    U_next = moments(f_t2, vg)
    M_next = maxwellian(U_next, vg)
    beta_next = _per_cell(pb.penalty.beta(U_next.rho))
    f_new = (eps * f_t2 + dt * (Qs - Ps) + half * Pn + beta_next * half * M_next) / (eps + beta_next * half)
    return replace(state, f=f_new, t=state.t + dt), StepInfo(moments_in=U_n, macro_update=U_next)


def _kinetic_rhs(f: np.ndarray, pb: KineticProblem) -> np.ndarray:
    return transport_rhs(f, pb.mesh, pb.vgrid) + boltzmann_spectral(f, pb.modes) / _per_cell(pb.knudsen.values)


def explicit_euler_step(state: KineticState, dt: float) -> tuple[KineticState, StepInfo]:
    f_new = state.f + dt * _kinetic_rhs(state.f, state.problem)
    return replace(state, f=f_new, t=state.t + dt), StepInfo()


def explicit_rk2_step(state: KineticState, dt: float) -> tuple[KineticState, StepInfo]:
    f_mid = state.f + 0.5 * dt * _kinetic_rhs(state.f, state.problem)
    f_new = state.f + dt * _kinetic_rhs(f_mid, state.problem)
    return replace(state, f=f_new, t=state.t + dt), StepInfo()


KINETIC_STEPS = {
    "imex1": ap_step1,
    "imex2": ap_step2,
    "explicit_euler": explicit_euler_step,
    "explicit_rk2": explicit_rk2_step,
}


def heat_flux(f: np.ndarray, state: MacroState, eps, grid: VelocityGrid) -> np.ndarray:
    """(1/eps) int (v - u) |v - u|^2 f dv per cell; columns (q_x, q_y)."""
    u = state.velocity
    eps = np.broadcast_to(np.asarray(eps, dtype=float), state.rho.shape)
    dx = grid.vx[None, :, :] - u[:, 0, None, None]
    dy = grid.vy[None, :, :] - u[:, 1, None, None]
    sq = dx * dx + dy * dy
    w = grid.weight
    qx = w * np.einsum("ijk,ijk->i", dx * sq, f) / eps
    qy = w * np.einsum("ijk,ijk->i", dy * sq, f) / eps
    return np.column_stack([qx, qy])


def maxwellian_distance(f: np.ndarray, grid: VelocityGrid) -> tuple[np.ndarray, float]:
    """Per-cell L1 distance to the local Maxwellian and the global relative distance."""
    U = moments(f, grid)
    M = maxwellian(U, grid)
    w = grid.weight
    per_cell = w * np.abs(f - M).sum(axis=(1, 2))
    total = float(per_cell.sum() / (w * np.abs(f).sum()))
    return per_cell, total


@dataclass
class KineticResult:
    times: list[float] = field(default_factory=list)
    macro: list[MacroState] = field(default_factory=list)
    flux: list[np.ndarray] = field(default_factory=list)
    dist_per_cell: list[np.ndarray] = field(default_factory=list)
    dist_total: list[float] = field(default_factory=list)
    snapshots: list[np.ndarray] = field(default_factory=list)
    dt: float = 0.0
    n_steps: int = 0
    # per step: (totals of moments(f^n), totals of the step's macro update)
    conservation: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    final: KineticState | None = None


def _check_overflow(f: np.ndarray, scale: float, step: int) -> None:
    m = float(np.max(np.abs(f)))
    if not np.isfinite(m) or m > OVERFLOW_THRESHOLD * scale:
        raise Overflow(f"|f| reached {m:.3e} at step {step}")


def run_kinetic(
    problem: KineticProblem,
    f0: np.ndarray,
    scheme: str = "imex2",
    t_end: float = 1.0,
    output_interval: float | None = None,
    cfl: float = 0.9,
    dt_factor: float = 1.0,
    record_snapshots: bool = False,
    record_conservation: bool = False,
    step_callback=None,
) -> KineticResult:
    """Advance to t_end with fixed dt = cfl dx / v_max (times dt_factor).

    dt is rounded down so an integer number of steps lands exactly on each
    output time.  Diagnostics (moments, heat flux, distance to the local
    Maxwellian, optional snapshots) are recorded at t = 0 and every interval.
    """
    if scheme not in KINETIC_STEPS:
        raise ValueError(f"unknown scheme {scheme!r}")
    step_fn = KINETIC_STEPS[scheme]
    mesh, vg = problem.mesh, problem.vgrid
    interval = t_end if output_interval is None else output_interval
    n_out = int(round(t_end / interval))
    if abs(n_out * interval - t_end) > 1e-9 * t_end:
        raise ValueError("t_end must be an integer multiple of output_interval")
    raw_dt = cfl * mesh.dx / vg.v_max * dt_factor
    per_interval = max(1, int(np.ceil(interval / raw_dt - 1e-12)))
    dt = interval / per_interval

    res = KineticResult(dt=dt, n_steps=n_out * per_interval)
    state = KineticState(f=np.array(f0, dtype=float), t=0.0, problem=problem)
    scale = max(float(np.max(np.abs(f0))), 1e-300)

    def record(st: KineticState):
        U = moments(st.f, vg)
        res.times.append(st.t)
        res.macro.append(U)
        res.flux.append(heat_flux(st.f, U, problem.knudsen.values, vg))
        pc, tot = maxwellian_distance(st.f, vg)
        res.dist_per_cell.append(pc)
        res.dist_total.append(tot)
        if record_snapshots:
            res.snapshots.append(st.f.copy())

    record(state)
    step = 0
    for _ in range(n_out):
        for _ in range(per_interval):
            step += 1
            state, info = step_fn(state, dt)
            _check_overflow(state.f, scale, step)
            if record_conservation and info.moments_in is not None:
                res.conservation.append(
                    (info.moments_in.conserved().sum(axis=0), info.macro_update.conserved().sum(axis=0))
                )
            if step_callback is not None:
                step_callback(state, info)
        state = replace(state, t=round(state.t / interval) * interval)  # kill time roundoff drift
        record(state)
    res.final = state
    return res
