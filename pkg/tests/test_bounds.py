"""
Approximation-error bounds: importance-sampled CF distance, the closed-form
bound, and the bound-versus-N experiment.
"""
import math

import numpy as np
import pytest
from scipy import integrate

from wsnsense.bounds import (
    BOUND_COLUMNS,
    BoundEstimate,
    _log_double_factorial,
    analytic_error_bound,
    bound_vs_n_experiment,
    cf_l1_distance_mc,
    write_bound_table,
)
from wsnsense.errors import DegenerateProposal, InvalidParam
from wsnsense.likelihoods import LikelihoodParams, cf_h1_approx, cf_h1_exact
from wsnsense.numerics import RngStream
from wsnsense.scenario import ScenarioConfig, build_source_covariance

SEED = 5150
H2 = np.array([0.5 + 0.2j, -0.3 + 0.4j])


def _params(M, trace=2.0):
    src = build_source_covariance(trace, 1.0, M, 0.5)
    return LikelihoodParams(M, M**0.25, 1.0, float(src.eigenvalues.sum()), src.eigenvalues)


# ----------------------------------------------------------------------------
# Monte Carlo CF distance
# ----------------------------------------------------------------------------

class TestMonteCarloDistance:
    def test_self_test_is_zero(self):
        est = cf_l1_distance_mc(_params(16), 5000, RngStream(SEED), h=H2, self_test=True)
        assert est.value == 0.0 and est.stderr == 0.0
        est = cf_l1_distance_mc(_params(16), 500, RngStream(SEED), variances=np.ones(2), self_test=True)
        assert est.value == 0.0

    def test_decreases_with_M(self):
        vals = [cf_l1_distance_mc(_params(M), 100_000, RngStream(SEED, M), h=H2[:1]).value for M in (8, 32, 128)]
        assert vals[0] > vals[1] > vals[2]

    def test_stderr_scaling(self):
        p = _params(16)
        se = {n: cf_l1_distance_mc(p, n, RngStream(SEED, 1), h=H2).stderr for n in (1000, 10_000, 100_000)}
        for n in (1000, 10_000):
            ratio = se[n] / se[10 * n] / math.sqrt(10)
            assert 1 / 1.5 <= ratio <= 1.5

    def test_unbiased_halves(self):
        p = _params(16)
        a = cf_l1_distance_mc(p, 50_000, RngStream(SEED, 2), h=H2)
        b = cf_l1_distance_mc(p, 50_000, RngStream(SEED, 3), h=H2)
        assert abs(a.value - b.value) < 3 * math.hypot(a.stderr, b.stderr)

    def test_quadrature_oracle_single_node(self):
        # N = 1: the integral is one-dimensional and quadrature is exact enough
        p = _params(8)
        h = H2[:1]
        f = lambda w: abs(cf_h1_exact(np.array([w]), h, p) - cf_h1_approx(np.array([w]), h, p))  # noqa: E731
        ref = 2 * integrate.quad(f, 0, np.inf, limit=500, epsabs=1e-14)[0] / (2 * math.pi)
        est = cf_l1_distance_mc(p, 200_000, RngStream(SEED, 4), h=h)
        assert abs(est.value - ref) < 5 * est.stderr

    def test_fast_fading_mode(self):
        est = cf_l1_distance_mc(_params(16), 2000, RngStream(SEED, 5), variances=np.array([1.0, 2.0]), k_h=50)
        assert est.value > 0 and est.stderr > 0

    def test_errors(self):
        with pytest.raises(DegenerateProposal):
            cf_l1_distance_mc(LikelihoodParams(1, 1.0, 1.0, 1.0, np.ones(1)), 100, RngStream(0), h=H2)
        with pytest.raises(InvalidParam):
            cf_l1_distance_mc(_params(8), 100, RngStream(0))
        with pytest.raises(ValueError):
            BoundEstimate(-1.0, 0.0, 1, "mc")


# ----------------------------------------------------------------------------
# Closed-form bound
# ----------------------------------------------------------------------------

class TestAnalyticBound:
    @pytest.mark.parametrize("k,ref", [(-1, 1), (0, 1), (1, 1), (2, 2), (5, 15), (8, 384), (13, 135135)])
    def test_double_factorial(self, k, ref):
        assert math.exp(_log_double_factorial(k)) == pytest.approx(ref, rel=1e-12)

    def test_integrals_by_quadrature(self):
        # the three one-dimensional integrals behind the closed form
        M, beta, s2 = 10, 10**0.25, 1.3
        env = lambda w, k: (1 + s2**2 * w * w / beta**2) ** (-k / 2)  # noqa: E731
        a = 2 * integrate.quad(lambda w: env(w, M), 0, np.inf)[0]
        b = 2 * integrate.quad(lambda w: w * env(w, M + 1), 0, np.inf)[0]
        c = 2 * integrate.quad(lambda w: w * w * env(w, M + 2), 0, np.inf)[0]
        df = lambda k: math.exp(_log_double_factorial(k))  # noqa: E731
        assert a == pytest.approx(df(M - 3) * beta * math.pi / (df(M - 2) * s2), rel=1e-9)
        assert b == pytest.approx(2 * beta**2 / (s2**2 * (M - 1)), rel=1e-9)
        assert c == pytest.approx(df(M - 3) * beta**3 * math.pi / (df(M) * s2**3), rel=1e-9)

    def test_zero_gain(self):
        assert analytic_error_bound(_params(16), np.zeros(3)) == 0.0

    def test_nonincreasing_in_M(self):
        vals = [analytic_error_bound(_params(M), H2) for M in (8, 16, 32)]
        assert vals[0] >= vals[1] >= vals[2]

    def test_dominates_mc(self):
        p = _params(16)
        est = cf_l1_distance_mc(p, 100_000, RngStream(SEED, 6), h=H2)
        assert analytic_error_bound(p, H2) >= est.value - 3 * est.stderr

    def test_restrictions(self):
        with pytest.raises(InvalidParam):
            analytic_error_bound(_params(9), H2)
        with pytest.raises(InvalidParam):
            analytic_error_bound(_params(2), H2)
        with pytest.raises(InvalidParam):
            analytic_error_bound(LikelihoodParams(8, 1.0, 1.0, 1.0), H2)

    def test_nonnegative_for_large_gains(self):
        v = analytic_error_bound(_params(16), np.full(6, 30.0))
        assert v >= 0 and math.isfinite(v)


# ----------------------------------------------------------------------------
# Bound versus number of nodes
# ----------------------------------------------------------------------------

class TestBoundVsN:
    CFG = ScenarioConfig(window_len=16, window_time=16 / 5e6, snr_db=10.0)

    def test_rows_and_columns(self, tmp_path):
        rows = bound_vs_n_experiment(self.CFG, [1, 2, 3], 2000, RngStream(SEED))
        assert [r.N for r in rows] == [1, 2, 3]
        assert all(r.mc_bound >= 0 and r.mc_stderr >= 0 for r in rows)
        assert all(r.analytic_bound >= r.mc_bound - 3 * r.mc_stderr for r in rows)
        write_bound_table(rows, tmp_path / "b.csv")
        assert (tmp_path / "b.csv").read_text().splitlines()[0] == ",".join(BOUND_COLUMNS)

    def test_reproducible(self):
        a = bound_vs_n_experiment(self.CFG, [1, 4], 1000, RngStream(SEED, 1))
        b = bound_vs_n_experiment(self.CFG, [1, 4], 1000, RngStream(SEED, 1))
        assert a == b

    def test_odd_M_reports_nan_analytic(self):
        cfg = self.CFG.replace(window_len=15, window_time=15 / 5e6)
        rows = bound_vs_n_experiment(cfg, [2], 500, RngStream(SEED))
        assert math.isnan(rows[0].analytic_bound)

    def test_requires_ascending(self):
        with pytest.raises(InvalidParam):
            bound_vs_n_experiment(self.CFG, [3, 2], 100, RngStream(0))
