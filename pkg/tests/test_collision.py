import numpy as np
import pytest

from kap.collision import (
    KernelModes,
    PenaltyConfig,
    bgk_apply,
    bgk_implicit_solve,
    boltzmann_spectral,
    load_kernel_modes,
    precompute_kernel_modes,
    save_kernel_modes,
)
from kap.errors import GridMismatch, QuadratureUnconverged
from kap.grid import MacroState, maxwellian, moments

from oracles import direct_kernel_mode, direct_spectral_collision


def macro(rho, u, T):
    return MacroState.from_primitive(np.atleast_1d(rho), np.atleast_2d(u), np.atleast_1d(T))


class TestKernelModes:
    def test_zero_mode_matches_closed_form(self, km8):
        # gamma = 0: B(0,0) = (2 pi)^2 C int_0^R r dr = 2 pi^2 C R^2
        R = km8.cutoff_radius
        expected = 2.0 * np.pi**2 * km8.c_gamma * R**2
        half = km8.n_v // 2
        assert km8.table[half, half, half, half] == pytest.approx(expected, rel=1e-12)

    def test_symmetry_l_m(self, km8):
        B = km8.table
        assert np.allclose(B, np.transpose(B, (2, 3, 0, 1)), rtol=0, atol=1e-13)

    def test_parity(self, km8):
        # B(l, m) = B(-l, -m): flip both centered axes of l and m; index 0 has
        # no mirror partner, so compare the symmetric block.
        B = km8.table[1:, 1:, 1:, 1:]
        assert np.allclose(B, B[::-1, ::-1, ::-1, ::-1], rtol=0, atol=1e-13)

    def test_matches_adaptive_quadrature(self, km8):
        half = km8.n_v // 2
        for (lx, ly, mx, my) in [(1, 2, -1, 3), (3, 3, 3, 3), (0, 1, 2, -3), (-3, 2, 1, 0)]:
            sp = np.hypot(lx + mx, ly + my)
            sm = np.hypot(lx - mx, ly - my)
            ref = direct_kernel_mode(sp, sm, km8.v_max, km8.gamma, km8.c_gamma)
            assert km8.table[lx + half, ly + half, mx + half, my + half] == pytest.approx(ref, rel=1e-9, abs=1e-10)

    def test_quadrature_doubling_guard(self, vg16):
        with pytest.raises(QuadratureUnconverged):
            precompute_kernel_modes(vg16, gamma=1.0, quadrature_n=4)

    def test_gamma_range_validation(self, vg8):
        with pytest.raises(ValueError):
            precompute_kernel_modes(vg8, gamma=1.5)

    def test_cache_roundtrip_bit_identical(self, km8, tmp_path):
        path = tmp_path / "km.npz"
        save_kernel_modes(km8, path)
        back = load_kernel_modes(path)
        assert np.array_equal(back.table, km8.table)
        assert back.cache_key() == km8.cache_key()
        assert back.metadata() == km8.metadata()

    def test_cache_version_guard(self, km8, tmp_path):
        import dataclasses

        path = tmp_path / "km.npz"
        save_kernel_modes(dataclasses.replace(km8, version=99), path)
        with pytest.raises(ValueError):
            load_kernel_modes(path)


class TestBgk:
    def test_well_balanced(self, vg32):
        U = macro(1.3, (0.2, -0.1), 0.8)
        M = maxwellian(U, vg32)
        out = bgk_apply(M, U, PenaltyConfig(), vg32)
        assert np.max(np.abs(out)) == 0.0

    def test_moments_of_output_small(self, vg32, rng):
        f = maxwellian(macro(1.0, (0.0, 0.0), 1.0), vg32)
        f = f * (1.0 + 0.2 * np.sin(vg32.vx / 2.0))
        U = moments(f, vg32)
        out = bgk_apply(f, U, PenaltyConfig(), vg32)
        beta_rho = float(PenaltyConfig().beta(U.rho)[0] * U.rho[0])
        w = vg32.weight
        assert abs(w * out.sum()) <= 1e-4 * beta_rho
        assert abs(w * (vg32.vx * out).sum()) <= 1e-4 * beta_rho
        assert abs(w * (0.5 * vg32.speed_sq * out).sum()) <= 1e-4 * beta_rho

    def test_linear_in_beta(self, vg32):
        f = maxwellian(macro(1.0, (0.0, 0.0), 1.0), vg32) * 1.1
        U = moments(f, vg32)
        out1 = bgk_apply(f, U, PenaltyConfig(nu=1.0), vg32)
        out2 = bgk_apply(f, U, PenaltyConfig(nu=2.0), vg32)
        assert np.array_equal(out2, 2.0 * out1)

    def test_implicit_solve_limits(self, rng):
        rhs = rng.random((4, 8, 8))
        M = rng.random((4, 8, 8))
        beta = rng.random(4) + 0.5
        eps = rng.random(4) * 0.1 + 1e-3
        assert np.allclose(bgk_implicit_solve(rhs, M, beta, eps, 0.0), rhs, rtol=1e-15)
        assert np.allclose(bgk_implicit_solve(rhs, M, beta, 1e-300, 1.0), M, rtol=1e-12)
        assert np.allclose(bgk_implicit_solve(M, M, beta, eps, 0.7), M, rtol=1e-14)

    def test_implicit_solve_is_exact_inverse(self, rng):
        rhs = rng.random((3, 8, 8))
        M = rng.random((3, 8, 8))
        beta = rng.random(3) + 0.2
        eps = rng.random(3) * 1e-3 + 1e-6
        dt = 0.01
        f = bgk_implicit_solve(rhs, M, beta, eps, dt)
        resid = f - rhs - (beta[:, None, None] * dt / eps[:, None, None]) * (M - f)
        assert np.max(np.abs(resid)) <= 1e-14 * max(1.0, np.max(np.abs(rhs)) * np.max(beta) * dt / np.min(eps))

    def test_moment_identity_of_solve(self, vg8, rng):
        # moments commute with the affine solve: no moment error beyond inputs
        rhs = rng.random((3, 8, 8)) + 0.1
        M = rng.random((3, 8, 8)) + 0.1
        beta = rng.random(3) + 0.5
        eps = np.full(3, 1e-6)
        dt = 0.01
        f = bgk_implicit_solve(rhs, M, beta, eps, dt)
        lhs = moments(f, vg8).conserved()
        th = (
            eps[:, None] * moments(rhs, vg8).conserved() + (beta * dt)[:, None] * moments(M, vg8).conserved()
        ) / (eps + beta * dt)[:, None]
        assert np.max(np.abs(lhs - th)) <= 1e-12 * np.max(np.abs(lhs))


class TestSpectral:
    def test_equilibrium_residual(self, vg32, km32):
        M = maxwellian(macro(1.0, (0.0, 0.0), 1.0), vg32)
        Q = boltzmann_spectral(M, km32)
        w = vg32.weight
        assert w * np.abs(Q).sum() / (w * np.abs(M).sum()) <= 1e-3

    def test_conservation_near_equilibrium(self, vg32, km32):
        M = maxwellian(macro(1.0, (0.3, -0.2), 0.9), vg32)[0]
        f = M * (1.0 + 0.1 * np.cos(2 * np.pi * vg32.vx / vg32.v_max) * np.exp(-0.1 * vg32.speed_sq))
        Q = boltzmann_spectral(f, km32)
        w = vg32.weight
        l1 = w * np.abs(f).sum()
        assert abs(w * Q.sum()) <= 1e-10 * l1
        assert abs(w * (vg32.vx * Q).sum()) <= 1e-4 * l1
        assert abs(w * (vg32.vy * Q).sum()) <= 1e-4 * l1
        assert abs(w * (0.5 * vg32.speed_sq * Q).sum()) <= 1e-4 * l1

    def test_mass_conserved_for_rough_data(self, vg8, km8, rng):
        f = rng.random((8, 8))
        Q = boltzmann_spectral(f, km8)
        w = vg8.weight
        assert abs(w * Q.sum()) <= 1e-10 * w * np.abs(f).sum()

    def test_quadratic_scaling(self, vg16, km16, rng):
        f = rng.random((16, 16))
        Q1 = boltzmann_spectral(f, km16)
        Q2 = boltzmann_spectral(2.0 * f, km16)
        assert np.allclose(Q2, 4.0 * Q1, rtol=1e-13, atol=1e-13 * np.max(np.abs(Q1)))

    def test_output_is_real_for_random_input(self, vg8, km8, rng):
        # realness is asserted internally; just exercise the path on rough data
        f = rng.random((5, 8, 8))
        Q = boltzmann_spectral(f, km8)
        assert Q.dtype == np.float64

    def test_grid_mismatch(self, km8, rng):
        with pytest.raises(GridMismatch):
            boltzmann_spectral(rng.random((4, 16, 16)), km8)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_direct_oracle(self, vg8, km8, seed):
        rng = np.random.default_rng(seed)
        f = rng.random((8, 8))
        Q = boltzmann_spectral(f, km8)
        Q_ref = direct_spectral_collision(f, vg8.v_max, km8.gamma, km8.c_gamma)
        rel = np.abs(Q - Q_ref).sum() / np.abs(Q_ref).sum()
        assert rel <= 1e-6

    def test_entropy_sign_diagnostic(self, vg32, km32):
        M = maxwellian(macro(1.0, (0.0, 0.0), 1.0), vg32)[0]
        f = M * (1.0 + 0.1 * np.cos(2 * np.pi * vg32.vx / vg32.v_max) * np.exp(-0.1 * vg32.speed_sq))
        Q = boltzmann_spectral(f, km32)
        w = vg32.weight
        val = w * np.sum(Q * np.log(f))
        assert val <= 1e-3 * w * np.abs(f).sum()
