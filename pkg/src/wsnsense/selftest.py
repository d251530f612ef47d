"""
Quick numerical self-checks against independent references (SciPy special
functions, quadrature, reconstruction identities). Used by ``wsnsense selftest``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

from .detectors import fuse_local_statistics, glrt_statistic, local_statistic
from .likelihoods import LikelihoodParams, log_pdf_ff, log_pdf_h0, log_pdf_sf
from .numerics import (
    cholesky_psd,
    hermitian_eigenvalues,
    log_bessel_i,
    log_gamma_lower_regularized,
    toeplitz_hermitian,
)


def _bessel():
    worst = 0.0
    for nu in (0, 1, 5, 9, 40, 127, 500):
        x = np.geomspace(1e-2, 1e3, 60)
        with np.errstate(divide="ignore"):
            ref = np.log(special.ive(nu, x)) + x
        ok = np.isfinite(ref)
        err = np.abs(np.expm1(log_bessel_i(nu, x[ok]) - ref[ok]))
        worst = max(worst, float(err.max()))
    return worst < 1e-10, f"max relative error of I_nu {worst:.2e}"


def _gamma():
    worst = 0.0
    for a in (0.5, 1.0, 9.0, 15.0, 127.0):
        x = np.geomspace(1e-3, 4 * a + 50, 60)
        err = np.abs(np.exp(log_gamma_lower_regularized(a, x)) - special.gammainc(a, x))
        worst = max(worst, float(err.max()))
    return worst < 1e-12, f"max absolute error of P(a, x) {worst:.2e}"


def _linalg():
    a = toeplitz_hermitian(0.5 ** np.arange(8))
    l = cholesky_psd(a)
    rec = np.linalg.norm(l @ l.conj().T - a) / np.linalg.norm(a)
    eig = hermitian_eigenvalues(a)
    tr = abs(eig.sum() - np.trace(a).real) / np.trace(a).real
    return rec < 1e-12 and tr < 1e-10, f"reconstruction {rec:.1e}, trace {tr:.1e}"


def _densities():
    p = LikelihoodParams(10, 10 ** 0.25, 1.0)
    worst = 0.0
    for f in (lambda e: log_pdf_h0(e, p), lambda e: log_pdf_sf(e, 3.0, p), lambda e: log_pdf_ff(e, 3.0, p)):
        v, _ = integrate.quad(lambda e: math.exp(f(e)), 0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)
        worst = max(worst, abs(v - 1))
    return worst < 1e-8, f"max normalization error {worst:.1e}"


def _distributed():
    rng = np.random.default_rng(0)
    p = LikelihoodParams(10, 10 ** 0.25, 1.0)
    e = rng.gamma(10, 1 / p.beta, size=(6, 8)) * (1 + rng.exponential(size=(6, 1)))
    mono = glrt_statistic(e, p, "SF")
    dist = fuse_local_statistics([local_statistic(r, p, "SF") for r in e])
    return mono == dist, f"monolithic {mono!r} vs recombined {dist!r}"


CHECKS = [("log_bessel_i", _bessel), ("log_gamma_lower_regularized", _gamma),
          ("cholesky/eigenvalues", _linalg), ("density normalization", _densities),
          ("GLRT distributability", _distributed)]


def run_selftest(report=print) -> bool:
    """Run every check; ``report`` receives one line per check. Returns overall success."""
    all_ok = True
    for name, fn in CHECKS:
        ok, msg = fn()
        all_ok &= bool(ok)
        report(f"{'PASS' if ok else 'FAIL'}  {name}: {msg}")
    return all_ok
