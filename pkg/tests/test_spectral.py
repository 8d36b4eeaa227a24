import numpy as np
import pytest
from scipy.integrate import solve_ivp

from eqlayer.errors import PreconditionError
from eqlayer.linsolve import bspline3
from eqlayer.spectral import (SpectralSolution, halfplane_solve, lambda_exact,
                              mode_evolve, sine_frequencies,
                              sine_multiplier_matrix, transparent_multiplier,
                              write_spectrum_csv)


def ode_oracle(xi, w0, z_end, sign, source=None, kappa=1.0):
    def rhs(z, u):
        c = u[0] + 1j * u[1]
        dc = -(z * 1j * xi - sign * kappa * abs(xi) ** 3) * c
        if source is not None:
            dc = dc + source(z)
        return [dc.real, dc.imag]

    sol = solve_ivp(rhs, (0.0, z_end), [w0.real, w0.imag], method="DOP853",
                    rtol=1e-12, atol=1e-14)
    return sol.y[0, -1] + 1j * sol.y[1, -1]


class TestModeEvolve:
    def test_decaying_branch_modulus_and_phase(self):
        w = mode_evolve(1.0, 1.0, 2.0, -1)
        assert abs(w) == pytest.approx(np.exp(-2.0), rel=1e-14)
        assert np.angle(w) == pytest.approx(-2.0, abs=1e-14)

    def test_zero_frequency_is_constant(self):
        for sign in (+1, -1):
            assert mode_evolve(0.0, 3.0 - 1.0j, 5.0, sign) == pytest.approx(3.0 - 1.0j)

    def test_constant_source_matches_ode_oracle(self):
        w = mode_evolve(1.0, 0.0, 1.5, -1, source=lambda s: 1.0 + 0.0j)
        ode = ode_oracle(1.0, 0.0 + 0.0j, 1.5, -1, source=lambda s: 1.0 + 0.0j)
        assert abs(w - ode) <= 1e-8 * abs(ode)

    @pytest.mark.parametrize("xi", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("sign", [+1, -1])
    def test_closed_form_vs_ode(self, xi, sign):
        w = mode_evolve(xi, 1.0 + 0.5j, 2.0, sign)
        ode = ode_oracle(xi, 1.0 + 0.5j, 2.0, sign)
        assert abs(w - ode) <= 1e-8 * abs(ode)

    def test_semigroup_with_matching_endpoints(self):
        xi, sign = 1.3, -1
        w1 = mode_evolve(xi, 1.0 + 0.2j, 1.1, sign)
        w2 = mode_evolve(xi, w1, 2.4, sign, z_from=1.1)
        direct = mode_evolve(xi, 1.0 + 0.2j, 2.4, sign)
        assert abs(w2 - direct) <= 1e-12 * abs(direct)

    def test_bad_sign(self):
        with pytest.raises(PreconditionError):
            mode_evolve(1.0, 1.0, 1.0, 0)


class TestHalfplane:
    def setup_method(self):
        self.period = 4.0 * np.pi
        self.N = 32
        self.xi = 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.period / self.N)
        self.z = np.linspace(0.0, 4.0, 33)

    def test_psi_condition_resolves_modes(self):
        # zero source: growing branch suppressed, w_-(0) = -2 |xi| psi_hat(0)
        bc = np.ones(self.N, dtype=complex)
        sol = halfplane_solve(self.xi, self.z, bc, bc_kind="psi")
        nz = np.abs(self.xi) > 0
        assert np.abs(sol.w_plus[nz]).max() == 0.0
        np.testing.assert_allclose(sol.w_minus[nz, 0],
                                   -2.0 * np.abs(self.xi[nz]), atol=1e-14)

    def test_exact_decay_invariant(self):
        sol = halfplane_solve(self.xi, self.z, np.ones(self.N), bc_kind="psi")
        k = 5
        expect = np.abs(sol.w_minus[k, 0]) * np.exp(-np.abs(self.xi[k]) ** 3 * self.z)
        np.testing.assert_allclose(np.abs(sol.w_minus[k]), expect, atol=1e-14)

    def test_real_reconstruction_for_hermitian_data(self):
        rng = np.random.default_rng(2)
        data = rng.standard_normal(self.N)
        sol = halfplane_solve(self.xi, self.z, np.fft.fft(data), bc_kind="psi")
        v_hat, psi_hat = sol.reconstruct_hat()
        v = np.fft.ifft(v_hat, axis=0)
        psi = np.fft.ifft(psi_hat, axis=0)
        assert np.abs(v.imag).max() <= 1e-12 * max(np.abs(v.real).max(), 1e-30)
        assert np.abs(psi.imag).max() <= 1e-12 * max(np.abs(psi.real).max(), 1e-30)

    def test_growing_mode_suppressed_beyond_source(self):
        def s_psi(x, s):
            return (1.0 + 0.3j) * bspline3((s - 1.0) / 0.4)

        def s_v(x, s):
            return 0.5 * bspline3((s - 1.2) / 0.4)

        sol = halfplane_solve(self.xi, self.z, np.zeros(self.N),
                              sources_hat=(s_psi, s_v), bc_kind="psi", kappa=0.5)
        beyond = self.z >= 2.1
        nz = np.abs(self.xi) > 0
        tail = np.abs(sol.w_plus[nz][:, beyond]).max()
        assert tail <= 1e-12 * np.abs(sol.w_minus).max()

    def test_duhamel_matches_mode_evolve(self):
        def s_psi(x, s):
            return (1.0 + 0.3j) * bspline3((s - 1.0) / 0.4)

        def s_v(x, s):
            return 0.5 * bspline3((s - 1.2) / 0.4)

        sol = halfplane_solve(self.xi, self.z, np.zeros(self.N),
                              sources_hat=(s_psi, s_v), bc_kind="psi", kappa=0.5)
        k = 2
        x0 = self.xi[k]
        src = lambda s: s_psi(x0, s) - abs(x0) * s_v(x0, s)
        ref = mode_evolve(x0, sol.w_minus[k, 0], self.z[-1], -1,
                          source=src, kappa=0.5)
        # two independent adaptive quadrature partitions agree near their
        # shared tolerance
        assert abs(sol.w_minus[k, -1] - ref) <= 1e-9 * max(abs(ref), 1e-10)

    def test_nondecaying_source_rejected(self):
        with pytest.raises(PreconditionError):
            halfplane_solve(self.xi, self.z, np.zeros(self.N),
                            sources_hat=(lambda x, s: 1.0, lambda x, s: 0.0))

    def test_spectrum_csv(self, tmp_path):
        sol = halfplane_solve(self.xi, self.z, np.ones(self.N), bc_kind="psi")
        path = tmp_path / "spectra.csv"
        write_spectrum_csv(path, sol)
        lines = path.read_text().strip().splitlines()
        header = [ln for ln in lines if not ln.startswith("#")][0]
        assert header == "xi,z,re_wplus,im_wplus,re_wminus,im_wminus"


class TestLambdaExact:
    def test_sine_eigenfunction(self):
        Ymax = 12.0
        y = np.linspace(0.0, Ymax, 49)[1:-1]
        k = 3 * np.pi / Ymax
        out = lambda_exact(np.sin(k * y), Ymax=Ymax, convention="sine")
        np.testing.assert_allclose(out, -np.sin(k * y) / k, atol=1e-12)

    def test_zero(self):
        out = lambda_exact(np.zeros(31), Ymax=10.0, convention="sine")
        assert np.all(out == 0.0)

    def test_quadratic_form_matches_parseval_sum(self):
        Ymax = 10.0
        Ny = 48
        rng = np.random.default_rng(11)
        t = rng.standard_normal(Ny - 1)
        out = lambda_exact(t, Ymax=Ymax, convention="sine")
        direct = float(t @ out)
        from scipy.fft import dst
        coeff = dst(t, type=1, norm="ortho")
        xi = sine_frequencies(Ny, Ymax)
        parseval = float(np.sum(-(coeff ** 2) / xi))
        assert direct == pytest.approx(parseval, abs=1e-10 * abs(parseval))
        assert direct <= 0.0

    def test_fourier_requires_zero_mean(self):
        with pytest.raises(PreconditionError):
            lambda_exact(np.ones(16), period=8.0, convention="fourier")

    def test_fourier_zero_mode_mapped_to_zero(self):
        t = np.sin(2 * np.pi * np.arange(16) / 16)
        out = lambda_exact(t, period=8.0, convention="fourier")
        assert abs(np.mean(out)) <= 1e-12

    def test_multiplier_regularity_bound(self):
        # |xi| |m(xi)| <= 1: the map gains one derivative
        xi = np.linspace(0.1, 50.0, 500)
        assert np.max(np.abs(xi * transparent_multiplier(xi))) <= 1.0 + 1e-12
        m0 = transparent_multiplier(xi, zero_order=True)
        assert np.all(m0 <= 0.0)
        # sup of sqrt((1+xi^2/2)/(1+xi^4/2)) sits slightly above one
        assert np.max(np.abs(m0)) <= 1.06


class TestTransparentMultiplier:
    def test_plain_symbol(self):
        np.testing.assert_allclose(transparent_multiplier(np.array([0.5, 2.0])),
                                   [-2.0, -0.5])
        assert transparent_multiplier(np.array([0.0]))[0] == 0.0

    def test_zero_order_symbol_limits(self):
        assert transparent_multiplier(np.array([0.0]), zero_order=True)[0] == -1.0
        big = transparent_multiplier(np.array([40.0]), zero_order=True)[0]
        assert big == pytest.approx(-1.0 / 40.0, rel=1e-3)

    def test_sine_matrix_symmetric(self):
        M = sine_multiplier_matrix(24, 10.0, lambda q: -1.0 / q)
        np.testing.assert_allclose(M, M.T, atol=1e-13)
