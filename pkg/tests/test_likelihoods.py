"""
Characteristic functions and per-node densities: closed forms, quadrature,
characteristic-function inversion and Monte Carlo oracles.
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from wsnsense.errors import InvalidParam
from wsnsense.likelihoods import (
    LikelihoodParams,
    cf_ff_avg,
    cf_h0,
    cf_h1_approx,
    cf_h1_exact,
    log_pdf_ff,
    log_pdf_h0,
    log_pdf_marginal_h1,
    log_pdf_sf,
    marginal_h1_method,
)
from wsnsense.scenario import build_source_covariance

RNG = np.random.default_rng(4401)
NORM_TOL = 1e-8
BETA10 = 10**0.25


def _params(M=10, trace=4.0, rho=0.5, s2=1.0, beta=None):
    src = build_source_covariance(trace, 1.0, M, rho)
    beta = M**0.25 if beta is None else beta
    return LikelihoodParams(M, beta, s2, float(src.eigenvalues.sum()), src.eigenvalues)


def _integral(logpdf, upper):
    val, _ = integrate.quad(lambda e: math.exp(logpdf(e)), 0, upper, limit=400, epsabs=1e-13, epsrel=1e-12)
    return val


# ----------------------------------------------------------------------------
# Parameters
# ----------------------------------------------------------------------------

class TestParams:
    def test_trace_consistency(self):
        with pytest.raises(InvalidParam):
            LikelihoodParams(2, 1.0, 1.0, 3.0, np.array([1.0, 1.0]))

    def test_invalid(self):
        with pytest.raises(InvalidParam):
            LikelihoodParams(0, 1.0, 1.0)
        with pytest.raises(InvalidParam):
            LikelihoodParams(2, 1.0, 0.0)

    def test_moments(self):
        p = LikelihoodParams(16, 2.0, 3.0)
        assert p.h0_mean == 24.0 and p.h0_std == 6.0


# ----------------------------------------------------------------------------
# Characteristic functions
# ----------------------------------------------------------------------------

class TestCharacteristicFunctions:
    P = _params(M=8)
    H = np.array([0.8 + 0.3j, -0.5 + 1.1j])

    def test_origin(self):
        w0 = np.zeros(2)
        assert cf_h0(w0, self.P) == 1
        assert cf_h1_exact(w0, self.H, self.P) == 1
        assert cf_h1_approx(w0, self.H, self.P) == 1
        assert cf_ff_avg(0.0, 2.0, self.P) == 1

    def test_h0_direct_substitution(self):
        p = LikelihoodParams(1, 1.0, 1.0)
        assert cf_h0(np.array([1.0]), p) == pytest.approx(0.5 + 0.5j, rel=1e-15)

    def test_h0_factorizes(self):
        w = np.array([0.7, -1.9])
        assert cf_h0(w, self.P) == pytest.approx(cf_h0(w[:1], self.P) * cf_h0(w[1:], self.P), rel=1e-14)

    def test_zero_gain_reduces_to_h0(self):
        w = np.array([0.7, -1.9])
        z = np.zeros(2)
        assert cf_h1_exact(w, z, self.P) == pytest.approx(cf_h0(w, self.P), rel=1e-14)
        assert cf_h1_approx(w, z, self.P) == pytest.approx(cf_h0(w, self.P), rel=1e-14)
        assert cf_ff_avg(0.7, 0.0, self.P) == pytest.approx(cf_h0(np.array([0.7]), self.P), rel=1e-14)

    def test_exact_single_node_white(self):
        s2s, M, beta = 0.6, 6, 1.7
        p = LikelihoodParams(M, beta, 1.0, s2s * M, np.full(M, s2s))
        h = np.array([1.2 - 0.7j])
        for w in (-3.0, 0.4, 2.5):
            ref = (1 - 1j * w * (s2s * abs(h[0]) ** 2 + 1.0) / beta) ** (-M)
            assert cf_h1_exact(np.array([w]), h, p) == pytest.approx(ref, rel=1e-13)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=2))
    def test_modulus_and_hermitian_symmetry(self, w):
        w = np.array(w)
        for f in (lambda v: cf_h0(v, self.P), lambda v: cf_h1_exact(v, self.H, self.P),
                  lambda v: cf_h1_approx(v, self.H, self.P),
                  lambda v: cf_ff_avg(v[0], 3.0, self.P)):
            a, b = f(w), f(-w)
            assert abs(a) <= 1 + 1e-12
            assert b == pytest.approx(np.conj(a), rel=1e-12, abs=1e-300)

    def test_approx_matches_empirical_cf_of_sf_law(self):
        # samples of the slow-fading law: 2 beta E / s2 ~ noncentral chi2(2M, 2c/s2)
        p = LikelihoodParams(10, BETA10, 1.0, 5.0)
        h = np.array([0.9])
        c = p.trace_s * abs(h[0]) ** 2
        n = 100_000
        e = stats.ncx2.rvs(2 * p.M, 2 * c, size=n, random_state=RNG) / (2 * p.beta)
        for w in (0.05, 0.2, 0.5, 1.0):
            v = np.exp(1j * w * e)
            emp = v.mean()
            se = max(v.real.std(), v.imag.std()) / math.sqrt(n)
            assert abs(emp - cf_h1_approx(np.array([w]), h, p)) < 5 * math.sqrt(2) * se

    def test_ff_average_matches_mc_average(self):
        p = LikelihoodParams(10, BETA10, 1.0, 3.0)
        var = 0.8
        g = RNG.exponential(var, 100_000)  # |h|^2
        for w in (0.1, 0.6, 2.0):
            vals = cf_h1_approx(np.full((g.size, 1), w), np.sqrt(g)[:, None], p)
            se = max(vals.real.std(), vals.imag.std()) / math.sqrt(g.size)
            assert abs(vals.mean() - cf_ff_avg(w, p.trace_s * var, p)) < 5 * math.sqrt(2) * se

    def test_factorization_error_shrinks_with_M(self):
        h = np.array([0.9 + 0.2j, 0.4 - 0.6j])
        grid = np.linspace(-5, 5, 11)
        w = np.stack(np.meshgrid(grid, grid), axis=-1).reshape(-1, 2)
        errs = []
        for M in (8, 32, 128):
            p = _params(M=M, trace=2.0)
            errs.append(np.max(np.abs(cf_h1_exact(w, h, p) - cf_h1_approx(w, h, p))))
        assert errs[0] > errs[1] > errs[2]

    def test_large_M_no_underflow(self):
        p = _params(M=1000, trace=5.0)
        v = cf_h1_exact(np.array([0.3, -0.2]), self.H, p)
        assert np.isfinite(v) and abs(v) <= 1


# ----------------------------------------------------------------------------
# H0 density
# ----------------------------------------------------------------------------

class TestH0:
    P = LikelihoodParams(10, BETA10, 1.3)

    def test_normalized(self):
        assert _integral(lambda e: log_pdf_h0(e, self.P), 60) == pytest.approx(1, abs=NORM_TOL)

    def test_mean(self):
        m, _ = integrate.quad(lambda e: e * math.exp(log_pdf_h0(e, self.P)), 0, 60, epsabs=1e-12)
        assert m == pytest.approx(self.P.h0_mean, rel=1e-9)

    def test_mode(self):
        mode = (self.P.M - 1) * self.P.sigma_v2 / self.P.beta
        eps = 1e-4
        assert log_pdf_h0(mode, self.P) > log_pdf_h0(mode * (1 - eps), self.P)
        assert log_pdf_h0(mode, self.P) > log_pdf_h0(mode * (1 + eps), self.P)

    def test_matches_scipy(self):
        e = np.linspace(0.1, 20, 30)
        ref = stats.gamma.logpdf(e, 10, scale=1.3 / BETA10)
        np.testing.assert_allclose(log_pdf_h0(e, self.P), ref, rtol=1e-13)

    def test_large_M(self):
        p = LikelihoodParams(5000, 5000**0.25, 1.0)
        assert math.isfinite(log_pdf_h0(p.h0_mean, p))


# ----------------------------------------------------------------------------
# Slow-fading density
# ----------------------------------------------------------------------------

class TestSlowFading:
    P = LikelihoodParams(10, BETA10, 1.0, 4.0)

    def test_zero_noncentrality(self):
        e = np.linspace(0.01, 20, 25)
        np.testing.assert_allclose(log_pdf_sf(e, 0.0, self.P), log_pdf_h0(e, self.P), rtol=1e-14)

    def test_continuity_at_zero_c(self):
        assert log_pdf_sf(5.0, 1e-20, self.P) == pytest.approx(log_pdf_h0(5.0, self.P), rel=1e-12)

    def test_normalized(self):
        assert _integral(lambda e: log_pdf_sf(e, 3.0, self.P), 80) == pytest.approx(1, abs=NORM_TOL)

    def test_frozen_extended_precision(self):
        # mpmath, 40 digits: beta = 10^(1/4), s2 = 1, M = 10, c = 3, E = 8
        assert log_pdf_sf(8.0, 3.0, self.P) == pytest.approx(-1.869767777870823536350551060367597794785, rel=1e-13)

    def test_matches_noncentral_chi2(self):
        e = np.linspace(0.2, 30, 40)
        c = 7.0
        ref = stats.ncx2.logpdf(2 * BETA10 * e, 20, 2 * c) + math.log(2 * BETA10)
        np.testing.assert_allclose(log_pdf_sf(e, c, self.P), ref, rtol=1e-10)

    def test_cf_inversion(self):
        c = 3.0
        p = self.P
        h = np.array([math.sqrt(c / p.trace_s)])

        def inv(e):
            f = lambda w: (cf_h1_approx(np.array([w]), h, p) * np.exp(-1j * w * e)).real  # noqa: E731
            val, _ = integrate.quad(f, 0, np.inf, limit=800, epsabs=1e-11)
            return val / math.pi

        for e in np.linspace(0.25, 30, 64):
            assert abs(inv(e) - math.exp(log_pdf_sf(e, c, p))) < 1e-6

    def test_huge_arguments_stay_finite(self):
        p = LikelihoodParams(400, 400**0.25, 1.0, 1.0)
        v = log_pdf_sf(1e5, 1e5, p)
        assert math.isfinite(v)

    def test_negative_c(self):
        with pytest.raises(InvalidParam):
            log_pdf_sf(1.0, -1.0, self.P)


# ----------------------------------------------------------------------------
# Fast-fading density
# ----------------------------------------------------------------------------

def _mixture(e, d, p):
    """Average of the slow-fading density over an exponential c with mean d."""
    f = lambda u: math.exp(log_pdf_sf(e, u, p) - u / d) / d  # noqa: E731
    val, _ = integrate.quad(f, 0, np.inf, limit=400, epsabs=0, epsrel=1e-11)
    return val


class TestFastFading:
    P = LikelihoodParams(10, BETA10, 1.0, 2.5)

    def test_M2_closed_form(self):
        p = LikelihoodParams(2, 2**0.25, 1.3)
        s2, b = p.sigma_v2, p.beta
        for e in (0.1, 1.0, 4.0):
            for d in (0.2, 3.0):
                ref = b / d * math.exp(-b * e / (s2 + d)) * (1 - math.exp(-b * d * e / (s2 * (s2 + d))))
                assert log_pdf_ff(e, d, p) == pytest.approx(math.log(ref), rel=1e-13)

    def test_normalized(self):
        assert _integral(lambda e: log_pdf_ff(e, 2.5, self.P), 200) == pytest.approx(1, abs=NORM_TOL)

    def test_frozen_extended_precision(self):
        # mpmath quadrature of the Rayleigh mixture, 40 digits: M = 10, d = 2.5, E = 9
        assert log_pdf_ff(9.0, 2.5, self.P) == pytest.approx(-2.439599908442276799378876170371616817588, rel=1e-12)

    @pytest.mark.parametrize("e,d", [(0.5, 0.3), (5.0, 1.0), (12.0, 4.0), (40.0, 20.0)])
    def test_rayleigh_mixture(self, e, d):
        assert math.exp(log_pdf_ff(e, d, self.P)) == pytest.approx(_mixture(e, d, self.P), rel=1e-6)

    def test_small_d_tends_to_h0(self):
        assert log_pdf_ff(4.0, 1e-14, self.P) == pytest.approx(log_pdf_h0(4.0, self.P), rel=1e-8)

    def test_invalid(self):
        with pytest.raises(InvalidParam):
            log_pdf_ff(1.0, 1.0, LikelihoodParams(1, 1.0, 1.0))
        with pytest.raises(InvalidParam):
            log_pdf_ff(1.0, -1.0, self.P)


# ----------------------------------------------------------------------------
# Exact marginal
# ----------------------------------------------------------------------------

class TestExactMarginal:
    def test_zero_gain(self):
        p = _params(M=6)
        e = np.linspace(0.1, 15, 20)
        np.testing.assert_allclose(log_pdf_marginal_h1(e, 0.0, p), log_pdf_h0(e, p), rtol=1e-12)

    def test_white_source_gamma(self):
        M, s2s, h2 = 8, 0.5, 2.0
        p = LikelihoodParams(M, 8**0.25, 1.0, M * s2s, np.full(M, s2s))
        assert marginal_h1_method(h2, p) == "gamma"
        e = np.linspace(0.2, 30, 20)
        ref = stats.gamma.logpdf(e, M, scale=(s2s * h2 + 1.0) / p.beta)
        np.testing.assert_allclose(log_pdf_marginal_h1(e, h2, p), ref, rtol=1e-12)

    def test_two_exponentials(self):
        p = LikelihoodParams(2, 1.0, 1e-9, 3.0, np.array([1.0, 2.0]))
        a1, a2 = 1.0 + 1e-9, 2.0 + 1e-9
        for e in (0.1, 1.0, 5.0):
            ref = (math.exp(-e / a2) - math.exp(-e / a1)) / (a2 - a1)
            assert log_pdf_marginal_h1(e, 1.0, p) == pytest.approx(math.log(ref), rel=1e-9)

    @pytest.mark.parametrize("M,rho", [(4, 0.5), (10, 0.5), (10, 0.9), (30, 0.5)])
    def test_normalized_with_correct_mean(self, M, rho):
        p = _params(M=M, rho=rho, trace=M * 1.0)
        h2 = 1.7
        hi = 40 * (p.trace_s * h2 + M) / p.beta
        f = lambda e: math.exp(log_pdf_marginal_h1(e, h2, p))  # noqa: E731
        tot, _ = integrate.quad(f, 0, hi, limit=400, epsabs=1e-13)
        mean, _ = integrate.quad(lambda e: e * f(e), 0, hi, limit=400, epsabs=1e-12)
        assert tot == pytest.approx(1, abs=NORM_TOL)
        assert mean == pytest.approx((p.trace_s * h2 + M * p.sigma_v2) / p.beta, rel=1e-7)

    def test_clustered_spectrum_uses_series(self):
        lam = np.array([1.0, 1.0 + 1e-9, 2.0, 3.0])
        p = LikelihoodParams(4, 1.0, 0.5, float(lam.sum()), lam)
        assert marginal_h1_method(1.0, p) == "gamma-series"
        f = lambda e: math.exp(log_pdf_marginal_h1(e, 1.0, p))  # noqa: E731
        tot, _ = integrate.quad(f, 0, 200, limit=400, epsabs=1e-13)
        assert tot == pytest.approx(1, abs=NORM_TOL)

    def test_routes_agree(self):
        # separated spectrum: partial fractions and the positive series agree
        from wsnsense.likelihoods import _gamma_series_log_pdf, _marginal_scales

        p = _params(M=5, trace=5.0)
        assert marginal_h1_method(1.0, p) == "partial-fractions"
        e = np.linspace(0.5, 20, 15)
        ref = _gamma_series_log_pdf(e, _marginal_scales(1.0, p))
        np.testing.assert_allclose(log_pdf_marginal_h1(e, 1.0, p), ref, rtol=1e-9)

    def test_matches_simulation(self):
        from wsnsense.measurement import ChannelDraw, simulate_energies
        from wsnsense.numerics import RngStream
        from wsnsense.scenario import ScenarioConfig

        cfg = ScenarioConfig(n_nodes=1, n_windows=50_000, window_len=6)
        src = build_source_covariance(6.0, 1.0, 6, 0.5)
        p = LikelihoodParams.from_source(src, cfg.beta, 1.0)
        h = 0.8 + 0.6j
        ch = ChannelDraw(np.ones(1), np.full((1, cfg.n_windows), h))
        e = simulate_energies("H1", cfg, src, ch, RngStream(12), sigma_v2=1.0).values.ravel()

        # CDF tabulated by piecewise quadrature
        grid = np.linspace(0, e.max(), 400)
        cg = np.concatenate([[0.0], np.cumsum([integrate.quad(
            lambda t: math.exp(log_pdf_marginal_h1(t, 1.0, p)), a, b)[0] for a, b in zip(grid[:-1], grid[1:])])])
        assert stats.kstest(e, lambda x: np.interp(x, grid, cg)).pvalue > 0.01

    def test_slow_fading_gap_shrinks_with_snr(self):
        # total variation between the noncentral-chi-square law and the exact
        # marginal, at fixed M and decreasing per-sample SNR
        M = 128

        def tv(snr_db):
            c = M * 10 ** (snr_db / 10)
            p = _params(M, trace=c)
            xs = np.linspace(0, 3 * (M + c) / p.beta, 6001)
            gap = np.abs(np.exp(log_pdf_sf(xs, c, p)) - np.exp(log_pdf_marginal_h1(xs, 1.0, p)))
            return 0.5 * integrate.trapezoid(gap, xs)

        vals = [tv(s) for s in (-3.0, -9.0, -15.0, -21.0)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert vals[0] > 0.02 and vals[-1] < 1e-3
