"""Velocity-space collision operators.

Two operators act per spatial cell:

* a BGK relaxation penalty beta(U) * (M_U - f) whose implicit time
  discretization has a closed-form solve, and
* the binary collision operator for a power-law kernel C_gamma |u|^gamma,
  evaluated spectrally on the velocity lattice through precomputed kernel
  modes.

Kernel-mode construction.  The distribution is assumed supported in the ball
of radius S = 2 v_max / (3 + sqrt 2); the relative-velocity integral is
truncated at R = 2S and the integrand periodized on [-v_max, v_max]^2, the
standard support condition under which the truncated sum is alias-free.  In
mode space the operator is

    Q_hat(k) = sum_{l+m=k} [ B(l, m) - B(m, m) ] f_hat(l) f_hat(m),

with the real symmetric tensor

    B(l, m) = (2 pi)^2 C_gamma int_0^R r^{gamma+1}
              J0(pi r |l+m| / (2 L)) J0(pi r |l-m| / (2 L)) dr,   L = v_max,

so gain and loss share one tensor and the k = 0 (mass) mode cancels
identically.  Modes are restricted to the symmetric set |k_i| <= n_v/2 - 1
(the lone -n_v/2 FFT mode is dropped), which makes the operator map real
distributions to real distributions to round-off.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.special import j0

from .errors import GridMismatch, QuadratureUnconverged
from .grid import MacroState, VelocityGrid, maxwellian
from .kernels import conv_modes

KERNEL_CACHE_VERSION = 1


@dataclass
class PenaltyConfig:
    """Relaxation-rate rule beta(U) = nu * base_rate * rho.

    For the Maxwell kernel (gamma = 0) the loss frequency is proportional to
    density, so a density-proportional rate upper-bounds the collision
    operator's derivative at equilibrium; nu > 1 over-estimates it.
    """

    nu: float = 1.0
    base_rate: float = 1.0

    def beta(self, rho: np.ndarray) -> np.ndarray:
        return self.nu * self.base_rate * np.asarray(rho)


@dataclass
class KernelModes:
    """Precomputed collision tensor B(l,m) on the centered mode set."""

    table: np.ndarray  # (n_v, n_v, n_v, n_v), centered order, index 0 unused
    diag: np.ndarray  # (n_v, n_v) loss diagonal B(m,m)
    n_v: int
    v_max: float
    gamma: float
    c_gamma: float
    quadrature_n: int
    support_radius: float
    cutoff_radius: float
    version: int = KERNEL_CACHE_VERSION

    def metadata(self) -> dict:
        return {
            "n_v": self.n_v,
            "v_max": self.v_max,
            "gamma": self.gamma,
            "c_gamma": self.c_gamma,
            "quadrature_n": self.quadrature_n,
            "version": self.version,
        }

    def cache_key(self) -> str:
        raw = "kernelmodes|v{version}|n{n_v}|vmax{v_max!r}|g{gamma!r}|c{c_gamma!r}|q{quadrature_n}".format(
            **self.metadata()
        )
        return hashlib.sha256(raw.encode()).hexdigest()[:16]


def _mode_table(n_v: int, v_max: float, gamma: float, c_gamma: float, nq: int) -> np.ndarray:
    """Assemble the 4D tensor from the radial Gauss-Legendre quadrature."""
    S = 2.0 * v_max / (3.0 + np.sqrt(2.0))
    R = 2.0 * S
    x, wq = np.polynomial.legendre.leggauss(nq)
    r = 0.5 * (x + 1.0) * R
    wr = 0.5 * R * wq * r ** (gamma + 1.0)

    k = np.arange(n_v) - n_v // 2
    # every |l+m|^2, |l-m|^2 is an integer in [0, 2 (2 half)^2]; tabulate by radius
    pvals = np.arange(-n_v, n_v)
    s_all = np.unique((pvals[:, None] ** 2 + pvals[None, :] ** 2).ravel())
    rad = np.sqrt(s_all.astype(float))
    bessel = j0(np.pi * rad[:, None] * r[None, :] / (2.0 * v_max))
    radial = (2.0 * np.pi) ** 2 * c_gamma * np.einsum("aq,bq,q->ab", bessel, bessel, wr)

    lookup = np.full(int(s_all[-1]) + 1, -1, dtype=np.int64)
    lookup[s_all] = np.arange(s_all.size)
    KX, KY = np.meshgrid(k, k, indexing="ij")
    lx = KX[:, :, None, None]
    ly = KY[:, :, None, None]
    mx = KX[None, None, :, :]
    my = KY[None, None, :, :]
    sp = (lx + mx) ** 2 + (ly + my) ** 2
    sm = (lx - mx) ** 2 + (ly - my) ** 2
    return radial[lookup[sp], lookup[sm]]


def precompute_kernel_modes(
    grid: VelocityGrid,
    gamma: float = 0.0,
    c_gamma: float = 1.0 / (2.0 * np.pi),
    quadrature_n: int = 64,
    check: bool = True,
) -> KernelModes:
    """Build the kernel-mode tensor; deterministic given its arguments.

    With check=True the radial quadrature is repeated at twice the order and
    QuadratureUnconverged is raised if any entry moves by more than 1e-8.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    table = _mode_table(grid.n_v, grid.v_max, gamma, c_gamma, quadrature_n)
    if check:
        fine = _mode_table(grid.n_v, grid.v_max, gamma, c_gamma, 2 * quadrature_n)
        drift = float(np.max(np.abs(fine - table)))
        if drift > 1e-8:
            raise QuadratureUnconverged(
                f"kernel-mode quadrature at n={quadrature_n} differs from n={2*quadrature_n} by {drift:.2e}"
            )
    diag = np.ascontiguousarray(np.einsum("xyxy->xy", table))
    S = 2.0 * grid.v_max / (3.0 + np.sqrt(2.0))
    return KernelModes(
        table=table,
        diag=diag,
        n_v=grid.n_v,
        v_max=grid.v_max,
        gamma=gamma,
        c_gamma=c_gamma,
        quadrature_n=quadrature_n,
        support_radius=S,
        cutoff_radius=2.0 * S,
    )


def save_kernel_modes(km: KernelModes, path) -> None:
    np.savez_compressed(
        path,
        table=km.table,
        n_v=km.n_v,
        v_max=km.v_max,
        gamma=km.gamma,
        c_gamma=km.c_gamma,
        quadrature_n=km.quadrature_n,
        support_radius=km.support_radius,
        cutoff_radius=km.cutoff_radius,
        version=km.version,
    )


def load_kernel_modes(path) -> KernelModes:
    with np.load(path) as z:
        if int(z["version"]) != KERNEL_CACHE_VERSION:
            raise ValueError(f"kernel cache version {int(z['version'])} != {KERNEL_CACHE_VERSION}")
        table = z["table"]
        return KernelModes(
            table=table,
            diag=np.ascontiguousarray(np.einsum("xyxy->xy", table)),
            n_v=int(z["n_v"]),
            v_max=float(z["v_max"]),
            gamma=float(z["gamma"]),
            c_gamma=float(z["c_gamma"]),
            quadrature_n=int(z["quadrature_n"]),
            support_radius=float(z["support_radius"]),
            cutoff_radius=float(z["cutoff_radius"]),
        )


def _phase(n_v: int) -> np.ndarray:
    """Per-axis factor mapping shifted FFT output to midpoint-lattice Fourier coefficients."""
    k = np.arange(n_v) - n_v // 2
    return (-1.0) ** k * np.exp(-1j * np.pi * k / n_v)


def to_modes(f: np.ndarray, n_v: int) -> np.ndarray:
    """Fourier coefficients of f on the midpoint lattice, centered mode order."""
    chi = _phase(n_v)
    F = np.fft.fftshift(np.fft.fft2(f, axes=(-2, -1)), axes=(-2, -1)) / n_v**2
    return F * chi[:, None] * chi[None, :]


def from_modes(c: np.ndarray, n_v: int) -> np.ndarray:
    """Inverse of to_modes (complex output; caller handles the real part)."""
    chi = _phase(n_v)
    F = c / (chi[:, None] * chi[None, :])
    return np.fft.ifft2(np.fft.ifftshift(F, axes=(-2, -1)), axes=(-2, -1)) * n_v**2


def boltzmann_spectral(f: np.ndarray, km: KernelModes) -> np.ndarray:
    """Collision operator per spatial cell via the precomputed kernel modes.

    Quadratic in f; conserves mass to round-off by the k = 0 mode structure,
    momentum and energy to spectral accuracy only.
    """
    f = np.asarray(f, dtype=float)
    squeeze = f.ndim == 2
    if squeeze:
        f = f[None]
    n_v = km.n_v
    if f.shape[1:] != (n_v, n_v):
        raise GridMismatch(f"distribution {f.shape[1:]} vs kernel modes n_v={n_v}")
    c = to_modes(f, n_v)
    c[:, 0, :] = 0.0
    c[:, :, 0] = 0.0
    c_cells_last = np.ascontiguousarray(np.moveaxis(c, 0, -1))
    q = conv_modes(c_cells_last, km.table, km.diag)
    q_hat = np.moveaxis(q, -1, 0)
    Q = from_modes(q_hat, n_v)
    scale = max(float(np.max(np.abs(f))), 1e-300) * km.diag[n_v // 2, n_v // 2]
    resid = float(np.max(np.abs(Q.imag)))
    if resid > 1e-10 * scale:
        raise GridMismatch(f"imaginary residue {resid:.2e} exceeds 1e-10 * {scale:.2e}")
    out = np.ascontiguousarray(Q.real)
    return out[0] if squeeze else out


def bgk_apply(f: np.ndarray, state: MacroState, cfg: PenaltyConfig, grid: VelocityGrid) -> np.ndarray:
    """Relaxation penalty beta(U) (M_U - f) per spatial cell."""
    M = maxwellian(state, grid)
    beta = cfg.beta(state.rho)
    return beta[:, None, None] * (M - f)


def bgk_implicit_solve(rhs: np.ndarray, m_next: np.ndarray, beta, eps, dt: float) -> np.ndarray:
    """Closed-form solve of f = rhs + (beta dt / eps) (M - f).

    beta and eps may be per-cell arrays (broadcast over velocity axes).
    """
    beta = np.asarray(beta, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if beta.ndim == 1:
        beta = beta[:, None, None]
    if eps.ndim == 1:
        eps = eps[:, None, None]
    bd = beta * dt
    return (eps * rhs + bd * m_next) / (eps + bd)
