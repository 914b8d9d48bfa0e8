"""Numba and numpy backends must produce identical results."""

import numpy as np
import pytest

from kap import kernels


@pytest.fixture()
def restore_backend():
    orig = kernels.get_backend()
    yield
    kernels.set_backend(orig)


def _mode_inputs(rng, N=16, ncell=5):
    from kap.collision import precompute_kernel_modes, to_modes
    from kap.grid import VelocityGrid

    vg = VelocityGrid(N, 7.0)
    km = precompute_kernel_modes(vg)
    f = rng.random((ncell, N, N))
    c = to_modes(f, N)
    c[:, 0, :] = 0.0
    c[:, :, 0] = 0.0
    c = np.ascontiguousarray(np.moveaxis(c, 0, -1))
    return c, km


def test_conv_modes_backends_agree(rng, restore_backend):
    c, km = _mode_inputs(rng)
    kernels.set_backend("numba")
    out_nb = kernels.conv_modes(c, km.table, km.diag)
    kernels.set_backend("numpy")
    out_np = kernels.conv_modes(c, km.table, km.diag)
    assert np.allclose(out_nb, out_np, rtol=1e-14, atol=1e-16 * np.max(np.abs(out_np)))


def test_muscl_backends_agree(rng, restore_backend):
    fe = rng.random((24, 8, 8))
    vx = np.linspace(-7, 7, 8)
    kernels.set_backend("numba")
    out_nb = kernels.muscl_rhs(fe, vx, 0.05)
    kernels.set_backend("numpy")
    out_np = kernels.muscl_rhs(fe, vx, 0.05)
    assert np.array_equal(out_nb, out_np)


def test_backend_selection_guard():
    with pytest.raises(ValueError):
        kernels.set_backend("cuda")
