"""Hot numeric kernels with two interchangeable backends.

The mode-space collision convolution and the MUSCL transport sweep dominate
runtime.  Both exist as numba @njit kernels and as pure-numpy fallbacks; the
two paths evaluate the same expressions in the same accumulation order, so
results agree to the last bit and do not depend on thread count.

Backend selection: environment variable KAP_BACKEND = "numba" | "numpy"
(default: numba when importable), or set_backend() at runtime.
benchmarks/bench_kernels.py times one against the other.
"""

from __future__ import annotations

import os

import numpy as np

_BACKEND = None
_NUMBA_FNS = None


def _resolve_default() -> str:
    env = os.environ.get("KAP_BACKEND", "auto").lower()
    if env in ("numba", "numpy"):
        return env
    try:
        import numba  # noqa: F401

        return "numba"
    except ImportError:
        return "numpy"


def set_backend(name: str) -> None:
    global _BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError("backend must be 'numba' or 'numpy'")
    if name == "numba":
        _load_numba()
    _BACKEND = name


def get_backend() -> str:
    global _BACKEND
    if _BACKEND is None:
        _BACKEND = _resolve_default()
        if _BACKEND == "numba":
            _load_numba()
    return _BACKEND


def _load_numba():
    global _NUMBA_FNS
    if _NUMBA_FNS is not None:
        return
    from numba import njit, prange

    @njit(cache=True, parallel=True)
    def conv_modes(c, B, Bd, out):
        # c, out: (N, N, ncell) complex in centered mode order, index 0 unused
        # (the lattice keeps the symmetric mode set so real f maps to real Q).
        N = B.shape[0]
        half = N // 2
        ncell = c.shape[2]
        for kx in prange(1, N):
            for ky in range(1, N):
                for lx in range(max(1, kx + half - N + 1), min(N, kx + half)):
                    mx = kx - lx + half
                    for ly in range(max(1, ky + half - N + 1), min(N, ky + half)):
                        my = ky - ly + half
                        w = B[lx, ly, mx, my] - Bd[mx, my]
                        for ic in range(ncell):
                            out[kx, ky, ic] += (w * c[lx, ly, ic]) * c[mx, my, ic]

    @njit(cache=True, parallel=True)
    def muscl_rhs(fe, vx_nodes, dx, rhs):
        # fe: (n_x+4, N, N) with two ghost layers per side; rhs: (n_x, N, N)
        n_ext, N, _ = fe.shape
        n_x = n_ext - 4
        n_if = n_x + 1
        for jx in prange(N):
            v = vx_nodes[jx]
            vp = v if v > 0.0 else 0.0
            vm = v if v < 0.0 else 0.0
            for jy in range(N):
                f_prev = 0.0
                for j in range(1, n_x + 2):
                    a = fe[j, jx, jy] - fe[j - 1, jx, jy]
                    b = fe[j + 1, jx, jy] - fe[j, jx, jy]
                    sL = 0.5 * (np.sign(a) + np.sign(b)) * min(abs(a), abs(b))
                    a2 = b
                    b2 = fe[j + 2, jx, jy] - fe[j + 1, jx, jy]
                    sR = 0.5 * (np.sign(a2) + np.sign(b2)) * min(abs(a2), abs(b2))
                    flux = vp * (fe[j, jx, jy] + 0.5 * sL) + vm * (fe[j + 1, jx, jy] - 0.5 * sR)
                    if j > 1:
                        rhs[j - 2, jx, jy] = -(flux - f_prev) / dx
                    f_prev = flux

    _NUMBA_FNS = {"conv_modes": conv_modes, "muscl_rhs": muscl_rhs}


def _conv_modes_numpy(c, B, Bd, out):
    N = B.shape[0]
    half = N // 2
    ncell = c.shape[2]
    pad = np.zeros((2 * N, 2 * N, ncell), dtype=np.complex128)
    for lx in range(1, N):
        for ly in range(1, N):
            w = (B[lx, ly, 1:, 1:] - Bd[1:, 1:])[:, :, None] * c[lx, ly]
            pad[lx + 1 : lx + N, ly + 1 : ly + N] += w * c[1:, 1:]
    out[1:, 1:] += pad[half + 1 : half + N, half + 1 : half + N]


def _muscl_rhs_numpy(fe, vx_nodes, dx, rhs):
    vp = np.maximum(vx_nodes, 0.0)[:, None]
    vm = np.minimum(vx_nodes, 0.0)[:, None]
    df = fe[1:] - fe[:-1]
    sgn = np.sign(df)
    slope = 0.5 * (sgn[:-1] + sgn[1:]) * np.minimum(np.abs(df[:-1]), np.abs(df[1:]))
    # slope[j-1] is the limited slope of extended cell j, j = 1 .. n_x+2
    flux = vp * (fe[1:-2] + 0.5 * slope[:-1]) + vm * (fe[2:-1] - 0.5 * slope[1:])
    rhs[...] = -(flux[1:] - flux[:-1]) / dx


def conv_modes(c: np.ndarray, B: np.ndarray, Bd: np.ndarray) -> np.ndarray:
    """Truncated mode-space convolution sum_{l+m=k} (B(l,m) - B(m,m)) c_l c_m.

    c is (N, N, ncell) in centered mode order; row/column 0 must be zero.
    """
    out = np.zeros_like(c)
    if get_backend() == "numba":
        _NUMBA_FNS["conv_modes"](c, B, Bd, out)
    else:
        _conv_modes_numpy(c, B, Bd, out)
    return out


def muscl_rhs(fe: np.ndarray, vx_nodes: np.ndarray, dx: float) -> np.ndarray:
    """-v_x df/dx with minmod-limited MUSCL upwind fluxes on a ghost-extended array."""
    n_x = fe.shape[0] - 4
    rhs = np.empty((n_x,) + fe.shape[1:], dtype=fe.dtype)
    if get_backend() == "numba":
        _NUMBA_FNS["muscl_rhs"](fe, vx_nodes, dx, rhs)
    else:
        _muscl_rhs_numpy(fe, vx_nodes, dx, rhs)
    return rhs
