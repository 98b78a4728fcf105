import math

import numpy as np
import pytest
from scipy.special import j0 as scipy_j0

from cohlim.circle_measure import InadmissibleMeasureError, PhaseMeasure, fourier_moment
from cohlim.functionals import (
    CoherentMode,
    CoherentModeSet,
    bessel_check,
    bessel_j0,
    discrete_phase_average_functional,
    divergence_diagnostic,
    finite_volume_functional,
    fock_functional,
    n_mode_functional,
    phase_averaged_functional,
    rarefied_finite_volume_phase,
    rarefied_functional,
    sigma_mu_sq,
)
from cohlim.mode_space import ModeDensity, MomentumGrid, TestFunction

from conftest import make_battery


class TestFockFunctional:
    def test_gaussian_closed_form(self):
        # |fhat|_2^2 = sqrt(pi) for fhat = e^{-k^2/2}; exponent sqrt(pi)/(8 pi)
        g = MomentumGrid(d=1, R=8.0, N=4096)
        f = TestFunction.from_profile(g, lambda k: np.exp(-(k ** 2) / 2.0))
        expect = math.exp(-math.sqrt(math.pi) / (8.0 * math.pi))
        assert fock_functional(f).value.real == pytest.approx(expect, rel=1e-12)

    def test_zero_function_gives_one(self, grid):
        f = TestFunction(grid, np.zeros(grid.n_cells))
        assert fock_functional(f).value == 1.0

    def test_modulus_at_most_one(self, grid):
        for f in make_battery(grid, 5):
            assert fock_functional(f).modulus <= 1.0

    def test_conjugation_axiom(self, gauss):
        # E(-f) = conj(E(f)); the Fock value is real so both sides coincide
        neg = gauss.with_values(-gauss.values)
        assert fock_functional(neg).value == pytest.approx(
            np.conj(fock_functional(gauss).value)
        )


class TestNModeFunctional:
    def test_empty_mode_set_is_fock(self, gauss):
        assert n_mode_functional(gauss, CoherentModeSet(())).value == pytest.approx(
            fock_functional(gauss).value
        )

    def test_single_mode_phase(self, gauss):
        modes = CoherentModeSet(((np.array([0.5]), 2.0, 0.3),))
        fv = n_mode_functional(gauss, modes)
        fhat = gauss.evaluate_at(np.array([[0.5]]))[0]
        expect_phase = np.real(np.exp(-0.3j) * math.sqrt(4.0) * fhat)
        assert fv.phase == pytest.approx(expect_phase)
        assert fv.modulus == pytest.approx(fock_functional(gauss).modulus)

    def test_phases_add_over_modes(self, gauss):
        m1 = CoherentModeSet(((np.array([0.5]), 2.0, 0.3),))
        m2 = CoherentModeSet(((np.array([-1.0]), 1.0, 1.1),))
        both = CoherentModeSet(m1.modes + m2.modes)
        assert n_mode_functional(gauss, both).phase == pytest.approx(
            n_mode_functional(gauss, m1).phase + n_mode_functional(gauss, m2).phase
        )

    def test_rejects_negative_density(self):
        with pytest.raises(ValueError):
            CoherentMode(np.array([0.0]), -1.0, 0.0)


class TestFiniteVolumeFunctional:
    def test_converges_to_limit(self):
        g = MomentumGrid(d=1, R=8.0, N=4096)
        f = TestFunction.from_profile(g, lambda k: math.sqrt(2 * math.pi) * np.exp(-(k ** 2) / 2.0))
        modes = CoherentModeSet(((np.array([0.7]), 1.3, 0.4),))
        limit = n_mode_functional(f, modes)
        errs = []
        for L in (50.0, 200.0, 800.0):
            fv = finite_volume_functional(
                lambda x: np.exp(-(x ** 2) / 2.0), f, L, modes, quad_points=16384
            )
            errs.append(abs(fv.phase - limit.phase))
        # lattice snapping gives an O(1/L) phase error
        assert errs[-1] < 5e-3
        assert errs[-1] < errs[0]

    def test_rejects_bad_box(self, gauss):
        with pytest.raises(ValueError):
            finite_volume_functional(lambda x: x, gauss, 0.0, CoherentModeSet(()))


class TestSigmaMuSq:
    def test_uniform_case_is_weighted_norm(self, gauss, rho):
        expect = float(
            gauss.grid.cell_volume * np.sum(rho.values * np.abs(gauss.values) ** 2)
        )
        assert sigma_mu_sq(gauss, rho, 0.0) == pytest.approx(expect)

    def test_nonnegative_across_mu2(self, gauss, rho):
        for mu2 in (0.0, 0.5, -1.0, 1j, -0.3 + 0.4j):
            assert sigma_mu_sq(gauss, rho, mu2) >= 0.0

    def test_vanishes_for_real_function_at_minus_one(self, grid, rho):
        f = TestFunction.from_profile(grid, lambda k: np.exp(-(k ** 2)))
        assert sigma_mu_sq(f, rho, -1.0) == pytest.approx(0.0, abs=1e-15)

    def test_doubles_for_real_function_at_plus_one(self, grid, rho):
        f = TestFunction.from_profile(grid, lambda k: np.exp(-(k ** 2)))
        assert sigma_mu_sq(f, rho, 1.0) == pytest.approx(
            2 * sigma_mu_sq(f, rho, 0.0)
        )

    def test_rejects_oversized_mu2(self, gauss, rho):
        with pytest.raises(ValueError):
            sigma_mu_sq(gauss, rho, 1.5)


class TestPhaseAveraged:
    def test_point_mass_rejected(self, gauss, rho):
        with pytest.raises(InadmissibleMeasureError):
            phase_averaged_functional(gauss, rho, PhaseMeasure.from_atoms([(0.0, 1.0)]))

    def test_value_formula(self, gauss, rho):
        mu = PhaseMeasure.opposite_pair()
        fv = phase_averaged_functional(gauss, rho, mu)
        sig = sigma_mu_sq(gauss, rho, fourier_moment(mu, 2))
        assert fv.value == pytest.approx(
            fock_functional(gauss).value * math.exp(-sig / 2.0)
        )

    def test_damps_relative_to_fock(self, gauss, rho):
        fv = phase_averaged_functional(gauss, rho, PhaseMeasure.uniform())
        assert 0 < fv.modulus <= fock_functional(gauss).modulus

    def test_discrete_product_converges_to_limit(self, rho):
        # grid refinement: the finite product of circle averages approaches
        # the closed-form limit value
        mu = PhaseMeasure.uniform()
        errs = []
        for n in (64, 256, 1024):
            g = MomentumGrid(d=1, R=4.0, N=n)
            f = TestFunction.from_profile(
                g, lambda k: np.exp(-(k ** 2) / 2.0) * np.exp(1j * k)
            )
            r = ModeDensity.from_profile(g, lambda k: np.exp(-((k - 1.0) ** 2)))
            limit = phase_averaged_functional(f, r, mu).value
            disc = discrete_phase_average_functional(f, g, r, mu).value
            errs.append(abs(disc - limit))
        # the J0 quartic term contributes O(1/N): each 4x refinement should
        # cut the error by about 4
        assert errs[-1] < 1e-3
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.3)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.3)

    def test_discrete_product_allows_inadmissible_measures(self, gauss, grid, rho):
        # the finite-N product is well defined even when the limit diverges
        mu = PhaseMeasure.from_atoms([(0.0, 1.0)])
        fv = discrete_phase_average_functional(gauss, grid, rho, mu)
        assert np.isfinite(fv.value.real)


class TestBessel:
    @pytest.mark.parametrize("x", [0.0, 0.5, 1.0, 2.4048, 5.0, 12.0])
    def test_series_against_scipy(self, x):
        # the alternating series loses ~e^x * eps to cancellation at large x
        assert bessel_j0(x) == pytest.approx(float(scipy_j0(x)), abs=1e-10)

    @pytest.mark.parametrize("amp", [0.0, 0.3, 1.0, 2.0, 4.5])
    def test_quadrature_matches_series(self, amp):
        chk = bessel_check(amp)
        assert abs(chk.quadrature.imag) < 1e-12
        assert chk.quadrature.real == pytest.approx(chk.series, abs=1e-12)


class TestDivergenceDiagnostic:
    def test_generic_growth_one_dimensional(self):
        fit = divergence_diagnostic(
            lambda k: np.exp(-(k ** 2) / 2.0),
            lambda k: np.exp(-(k ** 2)),
            lambda k: np.zeros(np.shape(k)),
            [64, 128, 256, 512, 1024],
            4.0,
            d=1,
        )
        assert fit.conclusive
        assert fit.slope == pytest.approx(0.5, abs=0.05)

    def test_generic_growth_two_dimensional(self):
        fit = divergence_diagnostic(
            lambda p: np.exp(-np.sum(p ** 2, axis=-1) / 2.0),
            lambda p: np.exp(-np.sum(p ** 2, axis=-1)),
            lambda p: np.zeros(len(p)),
            [16, 24, 32, 48, 64],
            4.0,
            d=2,
        )
        assert fit.conclusive
        assert fit.slope == pytest.approx(1.0, abs=0.1)

    def test_vanishing_sum_is_inconclusive(self):
        fit = divergence_diagnostic(
            lambda k: np.exp(-(k ** 2)),
            lambda k: np.zeros(np.shape(k)),
            lambda k: np.zeros(np.shape(k)),
            [64, 128, 256, 512],
            4.0,
            d=1,
        )
        assert not fit.conclusive

    def test_needs_enough_grid_sizes(self):
        with pytest.raises(ValueError):
            divergence_diagnostic(
                lambda k: k, lambda k: k, lambda k: k, [64, 128], 4.0
            )


class TestRarefied:
    def test_limit_phase_quadrature(self):
        g = MomentumGrid(d=1, R=4.0, N=1024)
        ghat = TestFunction.from_profile(g, lambda k: np.exp(-((k - 1.0) ** 2)), label="g")
        alpha = lambda k: np.exp(-((k - 1.0) ** 2))
        fv = rarefied_functional(ghat, alpha, 0.7, 0.2, 1.8)
        # analytic: sqrt(2)*0.7 * int_0.2^1.8 e^{-2(k-1)^2} dk
        from scipy.special import erf

        integral = math.sqrt(math.pi / 2) / 2 * (erf(math.sqrt(2) * 0.8) * 2)
        assert fv.phase == pytest.approx(math.sqrt(2) * 0.7 * integral, rel=1e-6)
        assert fv.modulus == pytest.approx(fock_functional(ghat).modulus)

    def test_finite_volume_phase_converges(self):
        g = MomentumGrid(d=1, R=4.0, N=1024)
        ghat = TestFunction.from_profile(g, lambda k: np.exp(-((k - 1.0) ** 2)))
        alpha = lambda k: np.exp(-((k - 1.0) ** 2))
        limit = rarefied_functional(ghat, alpha, 0.7, 0.2, 1.8).phase
        err = abs(rarefied_finite_volume_phase(ghat, alpha, 0.7, 0.2, 1.8, 1e5) - limit)
        assert err < 5e-3

    def test_rejects_nonpositive_sigma(self, gauss):
        with pytest.raises(ValueError):
            rarefied_functional(gauss, lambda k: k, 0.0, 0.0, 1.0)
