"""Kernel-module oracles: frozen closed-form values, scaling laws, lemma sweeps.

Expected values marked "frozen" were computed with mpmath at 40 digits from
Gamma-function identities and cross-checked against pi-breakpoint oscillatory
quadrature; they are independent of the panel rules under test.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erf

from rieszheat.kernels import (KernelParams, heat_kernel,
                               increment_energy_spatial,
                               increment_energy_spatial_abs,
                               increment_energy_spatial_lag,
                               increment_energy_temporal,
                               increment_energy_temporal_abs,
                               kernel_l1_increment, mean_value_ratio,
                               parseval_sides, riesz_convolution,
                               riesz_weighted_increment, spectral_constant,
                               surface_area, variance_rate)

P15 = KernelParams(k=1, beta=0.5)
P22 = KernelParams(k=2, beta=1.0)

# frozen closed forms (mpmath, 40 digits)
RIESZ_C = {(1, 0.25): 1.22637865249, (1, 0.5): 1.72007997465,
           (1, 0.75): 3.27763859288, (2, 0.5): 1.03044851229,
           (2, 1.0): 1.25331413732}
C_K_BETA = {(1, 0.25): 0.149270361083, (1, 0.5): 0.398942280401,
            (1, 0.75): 1.06621932135, (2, 0.5): 0.0760742798625,
            (2, 1.0): 0.159154943092}
KAPPA_INT = {0.25: 4.30510948503, 0.5: 2.41707327215,
             0.75: 1.89634894753, 1.0: 1.77245385091}
SPATIAL_INT = {(1, 0.25): 5.10419319935, (1, 0.5): 3.34217103284,
               (1, 0.75): 3.00125868657, (2, 0.5): 1.85964376898,
               (2, 1.0): 2.0}
TEMPORAL_INT = {0.25: 0.389645698366, 0.5: 0.457327460573,
                0.75: 0.562911377049, 1.0: 0.734174423725}


def loglog_slope(xs, ys):
    lx, ly = np.log(xs), np.log(ys)
    return np.polyfit(lx, ly, 1)[0]


class TestParams:
    def test_rejects_bad_beta(self):
        with pytest.raises(ValueError):
            KernelParams(k=1, beta=1.5)  # beta must be < min(2, k)
        with pytest.raises(ValueError):
            KernelParams(k=2, beta=0.0)
        with pytest.raises(ValueError):
            KernelParams(k=2, beta=2.0)
        with pytest.raises(ValueError):
            KernelParams(k=0, beta=0.5)

    def test_rejects_bad_tol(self):
        with pytest.raises(ValueError):
            KernelParams(k=1, beta=0.5, quad_tol=0.5)
        with pytest.raises(ValueError):
            KernelParams(k=1, beta=0.5, quad_tol=0.0)


class TestHeatKernel:
    def test_point_value(self):
        assert heat_kernel(1.0, 0.0, P15) == pytest.approx((2 * math.pi) ** -0.5,
                                                           rel=1e-14)

    def test_rejects_nonpositive_time(self):
        with pytest.raises(ValueError):
            heat_kernel(0.0, 0.0, P15)
        with pytest.raises(ValueError):
            heat_kernel(-1.0, 0.0, P15)

    @pytest.mark.parametrize("params", [P15, P22])
    def test_normalization_by_quadrature(self, params):
        k = params.k
        from rieszheat.quadrature import gauss_panels
        if k == 1:
            total = 2 * gauss_panels(
                lambda z: heat_kernel(0.37, z, params),
                np.linspace(0, 12 * math.sqrt(0.37), 200), order=10)
        else:
            total = 2 * math.pi * gauss_panels(
                lambda r: r * heat_kernel(0.37, np.stack([r, 0 * r], axis=-1),
                                          params),
                np.linspace(0, 12 * math.sqrt(0.37), 200), order=10)
        assert total == pytest.approx(1.0, rel=1e-10)

    @given(st.floats(0.05, 20.0), st.floats(0.1, 10.0),
           st.floats(-3.0, 3.0))
    @settings(max_examples=50, deadline=None)
    def test_parabolic_scaling(self, t, a, x):
        lhs = heat_kernel(a * a * t, a * x, P15)
        rhs = a ** -1.0 * heat_kernel(t, x, P15)
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestRieszConvolution:
    @pytest.mark.parametrize("k,beta", sorted(RIESZ_C))
    def test_frozen_constant(self, k, beta):
        params = KernelParams(k=k, beta=beta)
        assert riesz_convolution(1.0, params) == pytest.approx(
            RIESZ_C[k, beta], rel=1e-8)

    def test_spec_point_value(self):
        # 2^(1/4) Gamma(1/4) / sqrt(2 pi) at k=1, beta=1/2, t=1
        assert riesz_convolution(1.0, P15) == pytest.approx(1.7200, abs=1e-4)

    def test_quarter_time_ratio(self):
        beta = P15.beta
        ratio = riesz_convolution(4.0, P15) / riesz_convolution(1.0, P15)
        assert ratio == pytest.approx(4.0 ** (-beta / 2.0), rel=1e-12)

    def test_small_beta_limit_is_one(self):
        params = KernelParams(k=1, beta=1e-4)
        assert riesz_convolution(1.0, params) == pytest.approx(1.0, rel=2e-3)

    def test_rejects_zero_time(self):
        with pytest.raises(ValueError):
            riesz_convolution(0.0, P15)


class TestSpectralConstant:
    @pytest.mark.parametrize("k,beta", sorted(C_K_BETA))
    def test_frozen_constant(self, k, beta):
        params = KernelParams(k=k, beta=beta)
        assert spectral_constant(params).c_k_beta == pytest.approx(
            C_K_BETA[k, beta], rel=1e-8)

    @pytest.mark.parametrize("width", [0.5, 1.0, 2.0])
    def test_parseval_consistency_three_widths(self, width):
        lhs, rhs = parseval_sides(P15, width=width)
        c = spectral_constant(P15).c_k_beta
        assert lhs / rhs == pytest.approx(c, rel=P15.quad_tol * 10)

    def test_direct_double_integral_k1(self):
        # fully direct 2-d tensor route, independent of the convolution trick:
        # int int phi(x) |x-y|^-beta phi(y) dx dy with phi = exp(-x^2/2)
        from rieszheat.quadrature import gauss_panels, power_panel
        beta = P15.beta

        def corr(w):
            # int phi(v + w) phi(v) dv by plain quadrature
            w = np.atleast_1d(w)
            out = np.empty_like(w)
            edges = np.linspace(-14.0, 14.0, 281)
            for i, wi in enumerate(w):
                out[i] = gauss_panels(
                    lambda v: np.exp(-0.5 * (v + wi) ** 2 - 0.5 * v * v),
                    edges, order=8)
            return out

        lhs = 2.0 * (power_panel(corr, 1.0, -beta, order=24) + gauss_panels(
            lambda w: w ** -beta * corr(w), np.geomspace(1.0, 30.0, 40),
            order=12))
        c = spectral_constant(P15).c_k_beta
        rhs_int = 2.0 * (
            power_panel(lambda r: 2 * math.pi * np.exp(-r * r), 1.0,
                        beta - 1.0, order=24) +
            gauss_panels(lambda r: r ** (beta - 1.0) * 2 * math.pi *
                         np.exp(-r * r), np.linspace(1.0, 10.0, 40), order=12))
        # omega_0 = 2, |F phi|^2 = 2 pi e^{-rho^2}
        assert lhs == pytest.approx(c * rhs_int, rel=1e-6)


class TestVarianceRate:
    def test_zero(self):
        assert variance_rate(0.0, P15) == 0.0

    @pytest.mark.parametrize("k,beta", sorted(C_K_BETA))
    def test_frozen_amplitude(self, k, beta):
        params = KernelParams(k=k, beta=beta)
        expect = C_K_BETA[k, beta] * surface_area(k) * KAPPA_INT[beta]
        assert variance_rate(1.0, params) == pytest.approx(expect, rel=1e-7)

    def test_value_k1_half(self):
        assert variance_rate(1.0, P15) == pytest.approx(1.92854544618, rel=1e-7)

    def test_doubling_ratio(self):
        ratio = variance_rate(2.0, P15) / variance_rate(1.0, P15)
        assert ratio == pytest.approx(2.0 ** 0.75, rel=1e-12)

    def test_strictly_increasing(self):
        taus = np.geomspace(1e-3, 10, 12)
        vals = [variance_rate(t, P15) for t in taus]
        assert all(b > a for a, b in zip(vals, vals[1:]))


class TestIncrementEnergySpatial:
    def test_zero_lag(self):
        assert increment_energy_spatial(1.0, 0.3, 0.3, P15) == 0.0

    def test_infinite_horizon_frozen(self):
        for (k, beta), val in SPATIAL_INT.items():
            params = KernelParams(k=k, beta=beta)
            expect = C_K_BETA[k, beta] * surface_area(k) * val
            got = increment_energy_spatial_lag(math.inf, 1.0, params)
            assert got == pytest.approx(expect, rel=1e-6)

    def test_routes_agree_across_branch(self):
        # the difference route (below 4000 lag^2) and the saturated route
        # (above it) must agree where they meet
        for lag in (0.25, 1.0):
            below = increment_energy_spatial_lag(3999.0 * lag * lag, lag, P15)
            above = increment_energy_spatial_lag(4001.0 * lag * lag, lag, P15)
            assert below == pytest.approx(above, rel=2e-3)

    def test_slow_saturation_asymptotics(self):
        # Q(inf) - Q(s) ~ c omega Gamma(beta/2)/(2k) D^2 s^(-beta/2)
        from scipy.special import gamma
        from rieszheat.kernels import spectral_constant, surface_area
        lag, beta = 0.1, P15.beta
        c = spectral_constant(P15).c_k_beta
        for s in (1e4 * lag * lag, 1e6 * lag * lag):
            gap = (increment_energy_spatial_lag(math.inf, lag, P15) -
                   increment_energy_spatial_lag(s, lag, P15))
            lead = (c * surface_area(1) * gamma(beta / 2) / 2.0 *
                    lag * lag * s ** (-beta / 2))
            assert gap == pytest.approx(lead, rel=0.05)

    def test_monotone_in_horizon(self):
        vals = [increment_energy_spatial_lag(s, 0.5, P15)
                for s in (0.01, 0.1, 1.0, 10.0, math.inf)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))
        assert vals[0] > 0

    def test_matches_two_route_identity(self):
        # 2 * (variance_rate(s) - Cov) route vs saturated-branch route
        for s, lag in [(2.0, 0.02), (5.0, 0.03)]:
            a = increment_energy_spatial_lag(s, lag, P15)
            b = increment_energy_spatial_lag(math.inf, lag, P15)
            assert a < b
            assert a == pytest.approx(b, rel=0.2)  # nearly saturated

    def test_k2_oscillatory_path(self):
        got = increment_energy_spatial_lag(math.inf, 2.0, P22)
        expect = C_K_BETA[2, 1.0] * surface_area(2) * SPATIAL_INT[2, 1.0] * 2.0
        assert got == pytest.approx(expect, rel=1e-6)


class TestIncrementEnergyTemporal:
    def test_zero_lag(self):
        assert increment_energy_temporal(1.0, 0.0, P15) == 0.0

    def test_infinite_horizon_frozen(self):
        for beta, val in TEMPORAL_INT.items():
            k = 1 if beta < 1.0 else 2
            params = KernelParams(k=k, beta=beta)
            expect = (C_K_BETA[k, beta] * surface_area(k) * val *
                      0.3 ** ((2 - beta) / 2.0))
            got = increment_energy_temporal(math.inf, 0.3, params)
            assert got == pytest.approx(expect, rel=1e-6)

    def test_finite_approaches_infinite(self):
        delta = 0.05
        fin = increment_energy_temporal(500.0, delta, P15)
        inf_ = increment_energy_temporal(math.inf, delta, P15)
        assert fin == pytest.approx(inf_, rel=1e-3)
        assert fin <= inf_ * (1 + 1e-9)

    def test_nonnegative_and_monotone_in_horizon(self):
        vals = [increment_energy_temporal(t, 0.1, P15)
                for t in (0.01, 0.1, 1.0, 10.0)]
        assert all(v > 0 for v in vals)
        assert all(b >= a for a, b in zip(vals, vals[1:]))


class TestL1Increment:
    def test_identical_points(self):
        assert kernel_l1_increment(1.0, 0.2, 0.2, P15) == 0.0

    @pytest.mark.parametrize("rho", [0.1, 1.0, 10.0])
    def test_erf_oracle(self, rho):
        # closed form 2 erf(rho / (2 sqrt 2)) for the standardized integral
        got = kernel_l1_increment(1.0, rho / 2.0, -rho / 2.0, P15)
        assert got == pytest.approx(2.0 * erf(rho / (2 * math.sqrt(2))),
                                    rel=1e-8)

    def test_bounded_by_two(self):
        assert kernel_l1_increment(1e-4, 50.0, -50.0, P15) <= 2.0 + 1e-9

    def test_depends_only_on_scaled_lag(self):
        a = kernel_l1_increment(4.0, 1.0, -1.0, P15)
        b = kernel_l1_increment(1.0, 0.5, -0.5, P15)
        assert a == pytest.approx(b, rel=1e-9)

    def test_dimension_reduction_k2(self):
        # same scaled lag across k: exact factorization property
        a = kernel_l1_increment(1.0, np.array([0.4, 0.3]),
                                np.array([-0.4, -0.3]), P22)
        b = kernel_l1_increment(1.0, 0.5, -0.5, P15)
        assert a == pytest.approx(b, rel=1e-9)


class TestRieszWeightedIncrement:
    def test_identical_points(self):
        assert riesz_weighted_increment(1.0, 0.7, 0.7, P15) == 0.0

    def test_bounded_by_twice_convolution(self):
        for t, x, y in [(0.5, 0.3, -0.3), (2.0, 1.0, 0.2), (0.1, 5.0, -5.0)]:
            v = riesz_weighted_increment(t, x, y, P15)
            assert 0.0 < v <= 2.0 * riesz_convolution(t, P15) * (1 + 1e-8)

    def test_time_scaling_at_fixed_scaled_lag(self):
        # standardized integral fixed => value scales like t^(-beta/2)
        v1 = riesz_weighted_increment(1.0, 0.5, -0.5, P15)
        v4 = riesz_weighted_increment(4.0, 1.0, -1.0, P15)
        assert v4 == pytest.approx(v1 * 4.0 ** (-P15.beta / 2), rel=1e-7)

    def test_k2_positive_and_bounded(self):
        v = riesz_weighted_increment(1.0, np.array([0.5, 0.0]),
                                     np.array([-0.5, 0.0]), P22)
        assert 0.0 < v <= 2.0 * riesz_convolution(1.0, P22) * (1 + 1e-8)

    def test_k3_not_implemented(self):
        p3 = KernelParams(k=3, beta=0.5)
        with pytest.raises(NotImplementedError):
            riesz_weighted_increment(1.0, np.array([1.0, 0, 0]),
                                     np.array([0.0, 0, 0]), p3)


class TestLemmaSweeps:
    """Supremum LHS/RHS ratios: finite and stable under 2x refinement."""

    def _sup_ratio_l1(self, n):
        rhos = np.geomspace(1e-3, 1e3, n)
        vals = [kernel_l1_increment(1.0, r / 2, -r / 2, P15) /
                min(r, 1.0) for r in rhos]
        return max(vals)

    def test_l1_ratio_stable(self):
        coarse = self._sup_ratio_l1(13)
        fine = self._sup_ratio_l1(25)
        assert np.isfinite(fine)
        assert abs(fine - coarse) / coarse < 0.05

    def _sup_ratio_weighted(self, n):
        out = 0.0
        for t in (0.5, 2.0):
            for rho in np.geomspace(1e-2, 1e2, n):
                lag = rho * math.sqrt(t)
                v = riesz_weighted_increment(t, lag / 2, -lag / 2, P15)
                out = max(out, v / (t ** (-P15.beta / 2) * min(rho, 1.0)))
        return out

    def test_weighted_ratio_stable(self):
        coarse = self._sup_ratio_weighted(17)
        fine = self._sup_ratio_weighted(33)
        assert np.isfinite(fine)
        assert abs(fine - coarse) / coarse < 0.05

    def _sup_ratio_spatial(self, n):
        out = 0.0
        for s in np.geomspace(0.05, 5.0, n):
            for lag in np.geomspace(3e-2, 1.0, n):
                v = increment_energy_spatial_lag(s, lag, P15)
                out = max(out, v / lag ** (2 - P15.beta))
        return out

    def test_spatial_ratio_stable_and_dominated_by_infinite_horizon(self):
        coarse = self._sup_ratio_spatial(5)
        fine = self._sup_ratio_spatial(9)
        assert np.isfinite(fine)
        assert abs(fine - coarse) / max(fine, coarse) < 0.05
        cap = increment_energy_spatial_lag(math.inf, 1.0, P15)
        assert fine <= cap * (1 + 1e-6)

    def _sup_ratio_temporal(self, n):
        out = 0.0
        for t in np.geomspace(0.05, 5.0, n):
            for delta in np.geomspace(1e-3, 1.0, n):
                v = increment_energy_temporal(t, delta, P15)
                out = max(out, v / delta ** ((2 - P15.beta) / 2))
        return out

    def test_temporal_ratio_stable(self):
        coarse = self._sup_ratio_temporal(5)
        fine = self._sup_ratio_temporal(9)
        assert np.isfinite(fine)
        assert abs(fine - coarse) / max(fine, coarse) < 0.05

    def _sup_ratio_mean_value(self, n):
        out = 0.0
        for t in np.geomspace(0.01, 10.0, n):
            for lag in np.geomspace(1e-2, 10.0, n):
                for mid in (0.0, 1.0, 4.0):
                    x, y = mid + lag / 2, mid - lag / 2
                    out = max(out, mean_value_ratio(t, x, y, P15))
        return out

    def test_mean_value_ratio_stable(self):
        coarse = self._sup_ratio_mean_value(6)
        fine = self._sup_ratio_mean_value(11)
        assert np.isfinite(fine)
        assert abs(fine - coarse) / max(fine, coarse) < 0.05


class TestAbsoluteValueLemmas:
    def test_spatial_abs_dominates_quadratic_form(self):
        for s, lag in [(0.5, 0.3), (1.0, 0.8)]:
            qf = increment_energy_spatial_lag(s, lag, P15)
            av, tail = increment_energy_spatial_abs(s, lag / 2, -lag / 2, P15)
            assert tail < 1e-20
            assert av >= qf * (1 - 2e-2)

    def test_spatial_abs_ratio_bounded(self):
        pairs = [(0.25, 0.2), (0.5, 0.4), (1.0, 0.8), (2.0, 0.4)]
        ratios = [increment_energy_spatial_abs(s, lag / 2, -lag / 2, P15)[0] /
                  lag ** (2 - P15.beta) for s, lag in pairs]
        assert all(np.isfinite(r) and r > 0 for r in ratios)

    def test_temporal_abs_dominates_quadratic_form(self):
        for t, delta in [(0.5, 0.1), (1.0, 0.25)]:
            qf = increment_energy_temporal(t, delta, P15)
            av, tail = increment_energy_temporal_abs(t, delta, P15)
            assert tail < 1e-20
            assert av >= qf * (1 - 2e-2)

    def test_temporal_abs_ratio_bounded(self):
        pairs = [(0.5, 0.05), (1.0, 0.2), (2.0, 0.4)]
        ratios = [increment_energy_temporal_abs(t, d, P15)[0] /
                  d ** ((2 - P15.beta) / 2) for t, d in pairs]
        assert all(np.isfinite(r) and r > 0 for r in ratios)

    def test_requires_k1(self):
        with pytest.raises(NotImplementedError):
            increment_energy_spatial_abs(1.0, np.array([0.1, 0.0]),
                                         np.array([0.0, 0.0]), P22)
