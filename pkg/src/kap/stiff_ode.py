"""Penalized implicit-explicit integrators for df/dt = Q(f)/eps.

The stiff part is split off by a penalty operator P chosen so that the
implicit stage has a closed-form (or otherwise cheap) solve supplied by the
system itself; no Newton iteration anywhere.  First-order scheme:

    (f' - f)/dt = [Q(f) - P(f)]/eps + P(f')/eps

Second-order scheme: a half-step of the above to the midpoint, then the
midpoint rule for Q - P combined with the trapezoidal rule for P:

    2 (f* - f)/dt  = [Q(f) - P(f)]/eps + P(f*)/eps
    (f' - f)/dt    = [Q(f*) - P(f*)]/eps + [P(f) + P(f')]/(2 eps)

This module supports complex-valued states (the linear multi-scale test
below); the PDE modules are real-valued.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import Overflow, SolveFailure

OVERFLOW_THRESHOLD = 1e10


@dataclass
class PenalizedSystem:
    """Q, P and the implicit penalty solve for f - c P(f) = rhs.

    p_implicit_solve(rhs, c) must return f with f - c P(f) = rhs; the
    integrators call it with c = dt/eps (first order) and c = dt/(2 eps)
    (trapezoidal stages).  P must vanish on the equilibrium it penalizes.
    """

    q_apply: Callable[[np.ndarray], np.ndarray]
    p_apply: Callable[[np.ndarray], np.ndarray]
    p_implicit_solve: Callable[[np.ndarray, float], np.ndarray]
    eps: float = 1.0


def imex1_step(sys: PenalizedSystem, f: np.ndarray, dt: float) -> np.ndarray:
    rhs = f + (dt / sys.eps) * (sys.q_apply(f) - sys.p_apply(f))
    return sys.p_implicit_solve(rhs, dt / sys.eps)


def imex2_step(sys: PenalizedSystem, f: np.ndarray, dt: float) -> np.ndarray:
    h = dt / (2.0 * sys.eps)
    f_star = sys.p_implicit_solve(f + h * (sys.q_apply(f) - sys.p_apply(f)), h)
    rhs = f + (dt / sys.eps) * (sys.q_apply(f_star) - sys.p_apply(f_star)) + h * sys.p_apply(f)
    return sys.p_implicit_solve(rhs, h)


def explicit_euler_step(sys: PenalizedSystem, f: np.ndarray, dt: float) -> np.ndarray:
    return f + (dt / sys.eps) * sys.q_apply(f)


def explicit_rk2_step(sys: PenalizedSystem, f: np.ndarray, dt: float) -> np.ndarray:
    f_star = f + (dt / (2.0 * sys.eps)) * sys.q_apply(f)
    return f + (dt / sys.eps) * sys.q_apply(f_star)


def amplification_factor(lam: complex, nu: float, eps: float, dt: float) -> complex:
    """One-step factor of the first-order scheme on Q(f) = -lam f, P = -nu lam f."""
    return 1.0 - lam * dt / (eps + nu * lam * dt)


# --- linear multi-scale test system -----------------------------------------

TEST_MATRIX = np.array(
    [[-1000.0, 1.0, 0.0], [-1.0, -1000.0, 0.0], [0.0, 0.0, 1j]],
    dtype=complex,
)


@dataclass
class LinearTestSystem:
    """Q(f) = A f with two fast decaying modes and one neutral oscillator.

    Spectrum of A is {-1000 + i, -1000 - i, i}.  The penalty P(f) = nu A f
    over-estimates every eigenvalue for nu > 1.
    """

    nu: float = 2.0
    eps: float = 1.0
    matrix: np.ndarray = field(default_factory=lambda: TEST_MATRIX.copy())

    def penalized(self) -> PenalizedSystem:
        A = self.matrix
        nu = self.nu
        identity = np.eye(3, dtype=complex)

        def solve(rhs, c):
            try:
                return np.linalg.solve(identity - (c * nu) * A, rhs)
            except np.linalg.LinAlgError as exc:  # pragma: no cover
                raise SolveFailure(str(exc)) from exc

        return PenalizedSystem(
            q_apply=lambda f: A @ f,
            p_apply=lambda f: nu * (A @ f),
            p_implicit_solve=solve,
            eps=self.eps,
        )


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n_times, 3) complex
    overflow: bool = False
    overflow_step: int | None = None

    def export_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "re_f1", "im_f1", "re_f2", "im_f2", "re_f3", "im_f3"])
            for t, row in zip(self.times, self.states):
                wr.writerow([repr(float(t))] + [repr(float(x)) for pair in row for x in (pair.real, pair.imag)])


_SCHEME_STEPS = {
    "imex1": imex1_step,
    "imex2": imex2_step,
    "explicit_euler": explicit_euler_step,
    "explicit_rk2": explicit_rk2_step,
}


def run_linear_test(nu: float, dt: float, t_end: float, scheme: str, eps: float = 1.0) -> Trajectory:
    """Integrate the linear test system from the fixed initial state (1, 1, 1).

    A norm above 1e10 flags overflow (the expected explicit-scheme blow-up
    signal) and stops the run; the flag is reported, not raised.
    """
    if scheme not in _SCHEME_STEPS:
        raise ValueError(f"unknown scheme {scheme!r}")
    step = _SCHEME_STEPS[scheme]
    sys = LinearTestSystem(nu=nu, eps=eps).penalized()
    n_steps = int(round(t_end / dt))
    f = np.array([1.0, 1.0, 1.0], dtype=complex)
    times = [0.0]
    states = [f]
    overflow = False
    overflow_step = None
    for n in range(1, n_steps + 1):
        f = step(sys, f, dt)
        times.append(n * dt)
        states.append(f)
        if not np.all(np.isfinite(f.view(float))) or np.linalg.norm(f) > OVERFLOW_THRESHOLD:
            overflow = True
            overflow_step = n
            break
    return Trajectory(times=np.array(times), states=np.array(states), overflow=overflow, overflow_step=overflow_step)


def require_no_overflow(traj: Trajectory) -> Trajectory:
    if traj.overflow:
        raise Overflow(f"trajectory overflowed at step {traj.overflow_step}")
    return traj
