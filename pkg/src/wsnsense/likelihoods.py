"""
Characteristic functions and log-densities of the normalized energies.

Conventions: the CF of a density ``p`` is ``E[exp(j w E)]``; ``omega`` arrays
carry the node index on the last axis and may have arbitrary leading batch
dimensions. All densities are returned as natural logs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .errors import DegenerateSpectrum, InvalidParam
from .numerics import log_bessel_i, log_gamma_lower_regularized

__all__ = [
    "LikelihoodParams",
    "cf_h0",
    "cf_h1_exact",
    "cf_h1_approx",
    "cf_ff_avg",
    "log_pdf_h0",
    "log_pdf_marginal_h1",
    "marginal_h1_method",
    "log_pdf_sf",
    "log_pdf_ff",
    "D_FLOOR_REL",
]

# relative floor applied to the fast-fading parameter d (times sigma_v2)
D_FLOOR_REL = 1e-12


@dataclass(frozen=True)
class LikelihoodParams:
    """Parameters shared by every likelihood.

    Attributes
    ----------
    M : int
        Window length (complex samples per energy).
    beta : float
        Energy normalization.
    sigma_v2 : float
        Noise power per complex sample.
    trace_s : float
        Trace of the source covariance.
    eigenvalues : ndarray, optional
        The ``M`` source covariance eigenvalues (needed by the exact CF and the
        exact per-node marginal only).
    """

    M: int
    beta: float
    sigma_v2: float
    trace_s: float = 0.0
    eigenvalues: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.M < 1:
            raise InvalidParam("M must be >= 1")
        if not (self.beta > 0 and self.sigma_v2 > 0):
            raise InvalidParam("beta and sigma_v2 must be positive")
        if self.trace_s < 0:
            raise InvalidParam("trace_s must be nonnegative")
        if self.eigenvalues is not None:
            lam = np.asarray(self.eigenvalues, dtype=float).copy()
            lam.setflags(write=False)
            object.__setattr__(self, "eigenvalues", lam)
            if np.any(lam < 0):
                raise InvalidParam("eigenvalues must be nonnegative")
            tot = float(lam.sum())
            if abs(tot - self.trace_s) > 1e-10 * max(abs(self.trace_s), tot, 1e-300):
                raise InvalidParam("eigenvalues do not sum to trace_s")

    @property
    def h0_mean(self) -> float:
        """Mean energy under H0, ``M sigma_v2 / beta``."""
        return self.M * self.sigma_v2 / self.beta

    @property
    def h0_std(self) -> float:
        """Energy standard deviation under H0, ``sqrt(M) sigma_v2 / beta``."""
        return math.sqrt(self.M) * self.sigma_v2 / self.beta

    def rescaled(self, factor: float) -> "LikelihoodParams":
        """Same model with every power multiplied by ``factor`` (unit change)."""
        lam = None if self.eigenvalues is None else self.eigenvalues * factor
        return LikelihoodParams(self.M, self.beta, self.sigma_v2 * factor, self.trace_s * factor, lam)

    @classmethod
    def from_source(cls, src, beta: float, sigma_v2: float) -> "LikelihoodParams":
        """Build from a :class:`~wsnsense.scenario.SourceModel`."""
        lam = np.asarray(src.eigenvalues, dtype=float)
        # enforce the exact trace identity on the clipped spectrum
        tr = float(lam.sum())
        return cls(src.window_len, beta, sigma_v2, tr, lam)


# ---------------------------------------------------------------------------
# Characteristic functions (log-sum form)
# ---------------------------------------------------------------------------

def _noise_factor(omega, p: LikelihoodParams):
    """``1 - j w sigma_v2 / beta`` elementwise."""
    return 1.0 - 1j * np.asarray(omega, dtype=float) * (p.sigma_v2 / p.beta)


def cf_h0(omega, p: LikelihoodParams):
    """Joint H0 CF ``prod_n (1 - j w_n sigma_v2/beta)^(-M)``."""
    a = _noise_factor(omega, p)
    return np.exp(-p.M * np.log(a).sum(axis=-1))


def cf_h1_exact(omega, h, p: LikelihoodParams):
    """Exact joint H1 CF for fixed channel gains ``h`` (length N).

    Uses ``log Psi1 = log Psi0 - sum_m log(1 - j lam_m/beta * S(w))`` with
    ``S(w) = sum_n |h_n|^2 w_n / (1 - j w_n sigma_v2/beta)``.
    """
    if p.eigenvalues is None:
        raise InvalidParam("exact CF requires the source eigenvalues")
    omega = np.asarray(omega, dtype=float)
    h2 = np.abs(np.asarray(h)) ** 2
    a = _noise_factor(omega, p)
    s = (h2 * omega / a).sum(axis=-1)
    lam = p.eigenvalues / p.beta
    logpsi = -p.M * np.log(a).sum(axis=-1)
    logpsi = logpsi - np.log(1.0 - 1j * np.multiply.outer(s, lam)).sum(axis=-1)
    return np.exp(logpsi)


def cf_h1_approx(omega, h, p: LikelihoodParams):
    """Factorized H1 CF: product over nodes of noncentral-chi-square CFs.

    Per node: ``exp(j c_n w_n / (beta a_n)) a_n^(-M)`` with
    ``c_n = trace_s |h_n|^2`` and ``a_n = 1 - j w_n sigma_v2/beta``.
    """
    omega = np.asarray(omega, dtype=float)
    c = p.trace_s * np.abs(np.asarray(h)) ** 2
    a = _noise_factor(omega, p)
    logpsi = (1j * c * omega / (p.beta * a) - p.M * np.log(a)).sum(axis=-1)
    return np.exp(logpsi)


def cf_ff_avg(omega, d, p: LikelihoodParams):
    """Per-node fast-fading CF averaged over the Rayleigh gain.

    ``(1 - j sigma_v2 w/beta)^(-(M-1)) (1 - j (sigma_v2 + d) w/beta)^(-1)``,
    elementwise in ``omega`` and ``d``.
    """
    omega = np.asarray(omega, dtype=float)
    d = np.asarray(d, dtype=float)
    a = _noise_factor(omega, p)
    b = 1.0 - 1j * omega * ((p.sigma_v2 + d) / p.beta)
    return np.exp(-(p.M - 1) * np.log(a) - np.log(b))


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------

def _log_gamma_pdf(x, shape: float, scale):
    """Gamma log-density; ``-inf`` for ``x < 0`` (and ``x = 0`` when shape > 1)."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if shape == 1:
            core = -x / scale
        else:
            core = (shape - 1) * np.log(x) - x / scale
        out = core - gammaln(shape) - shape * np.log(scale)
    return np.where(x < 0, -np.inf, out)


def log_pdf_h0(E, p: LikelihoodParams):
    """Per-node H0 log-density: Gamma with shape ``M`` and scale ``sigma_v2/beta``."""
    out = _log_gamma_pdf(E, p.M, p.sigma_v2 / p.beta)
    return out if np.ndim(out) else float(out)


def _log_0f1_bessel(nu: int, log_z, z):
    """``log[Gamma(nu+1) (z/2)^(-nu) I_nu(z)]`` (the regularized 0F1(;nu+1;z^2/4)).

    Uses the leading Taylor term for tiny ``z`` where the Bessel value underflows.
    """
    small = z < 1e-8
    zz = np.where(small, 1.0, z)
    big = log_bessel_i(nu, zz) - nu * (np.where(small, 0.0, log_z) - math.log(2.0)) + gammaln(nu + 1)
    tiny = 0.25 * z * z / (nu + 1)
    return np.where(small, tiny, big)


def log_pdf_sf(E, c, p: LikelihoodParams):
    """Per-node slow-fading log-density with noncentrality ``c = trace_s |h|^2``.

    Scaled noncentral chi-square with ``2M`` degrees of freedom::

        log p = log(beta/s2) - (beta E + c)/s2 + (M-1)/2 (log beta E - log c)
                + log I_{M-1}(2 sqrt(beta c E)/s2)

    assembled as ``log_pdf_h0(E) - c/s2 + log 0F1`` so that ``c = 0`` reduces to
    the H0 density continuously. ``E`` and ``c`` broadcast.
    """
    E = np.asarray(E, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.any(c < 0):
        raise InvalidParam("c must be nonnegative")
    s2 = p.sigma_v2
    base = _log_gamma_pdf(E, p.M, s2 / p.beta)
    with np.errstate(divide="ignore"):
        log_z = math.log(2.0) + 0.5 * (math.log(p.beta) + np.log(c) + np.log(np.maximum(E, 0.0))) - math.log(s2)
    z = np.exp(log_z)
    corr = _log_0f1_bessel(p.M - 1, log_z, z)
    out = base - c / s2 + corr
    out = np.where(E < 0, -np.inf, out)
    return out if np.ndim(out) else float(out)


def log_pdf_ff(E, d, p: LikelihoodParams):
    """Per-node fast-fading log-density with ``d = trace_s sigma_n^2``.

    Convolution of Gamma(M-1, s2/beta) with an exponential of mean
    ``(s2 + d)/beta``::

        log p = log beta + (M-2) log(s2+d) - (M-1) log d - beta E/(s2+d)
                + log P(M-1, beta d E / (s2 (s2+d)))

    ``d`` is clamped to ``D_FLOOR_REL * s2`` from below.
    """
    if p.M < 2:
        raise InvalidParam("fast-fading density requires M >= 2")
    E = np.asarray(E, dtype=float)
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise InvalidParam("d must be nonnegative")
    s2 = p.sigma_v2
    d = np.maximum(d, D_FLOOR_REL * s2)
    sd = s2 + d
    x = p.beta * d * np.maximum(E, 0.0) / (s2 * sd)
    out = (math.log(p.beta) + (p.M - 2) * np.log(sd) - (p.M - 1) * np.log(d)
           - p.beta * E / sd + log_gamma_lower_regularized(p.M - 1, x))
    out = np.where(E < 0, -np.inf, out)
    return out if np.ndim(out) else float(out)


# ---- exact per-node marginal (sum of independent exponentials) ------------

# partial fractions are used only while every weight is below this size
_PF_MAX_WEIGHT = 1e4
_PF_CANCEL = 1e-4
_SERIES_TOL = 1e-15
_SERIES_MAX_TERMS = 20000


def _marginal_scales(h2: float, p: LikelihoodParams) -> np.ndarray:
    if p.eigenvalues is None:
        raise InvalidParam("exact marginal requires the source eigenvalues")
    return np.sort((p.eigenvalues * h2 + p.sigma_v2) / p.beta)


def _pf_log_weights(a: np.ndarray):
    """Signed log of ``w_m = prod_{j != m} a_m / (a_m - a_j)``."""
    diff = a[:, None] - a[None, :]
    np.fill_diagonal(diff, 1.0)
    ratio = a[:, None] / diff
    np.fill_diagonal(ratio, 1.0)
    sign = np.prod(np.sign(ratio), axis=1)
    logw = np.log(np.abs(ratio)).sum(axis=1)
    return sign, logw


def marginal_h1_method(h2: float, p: LikelihoodParams) -> str:
    """Which evaluation route :func:`log_pdf_marginal_h1` takes: ``gamma``,
    ``partial-fractions`` or ``gamma-series``."""
    a = _marginal_scales(h2, p)
    if a[-1] - a[0] <= 1e-8 * a[-1]:
        return "gamma"
    if np.min(np.diff(a)) > 0:
        _, logw = _pf_log_weights(a)
        if np.max(logw) < math.log(_PF_MAX_WEIGHT):
            return "partial-fractions"
    return "gamma-series"


def _gamma_series_log_pdf(E, a: np.ndarray):
    """Density of a sum of exponentials with scales ``a`` as a positive mixture
    of Gamma(M + k, a_min) laws (Moschopoulos expansion)."""
    m = a.size
    a1 = a[0]
    q = 1.0 - a1 / a  # in [0, 1)
    c0 = math.exp(float(np.sum(np.log(a1 / a))))
    # delta recursion; the mixture weights c0*delta_k are probabilities, so
    # stop once their running sum is within tolerance of one
    gam = [0.0]
    delta = [1.0]
    total = c0
    k = 0
    while total < 1.0 - _SERIES_TOL and k < _SERIES_MAX_TERMS:
        k += 1
        gam.append(float(np.sum(q**k)) / k)
        delta.append(sum(i * gam[i] * delta[k - i] for i in range(1, k + 1)) / k)
        total += c0 * delta[-1]
    if total < 1.0 - 1e-9:
        raise DegenerateSpectrum("gamma-series expansion did not converge for this spectrum")
    weights = c0 * np.asarray(delta)
    E = np.asarray(E, dtype=float)
    kk = np.arange(weights.size)
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
        le = np.log(np.maximum(E, 0.0))[..., None]
        terms = logw + (m + kk - 1) * le - E[..., None] / a1 - gammaln(m + kk) - (m + kk) * math.log(a1)
    terms = np.where(np.isnan(terms), -np.inf, terms)
    mx = np.max(terms, axis=-1, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    with np.errstate(divide="ignore"):
        return np.log(np.sum(np.exp(terms - mx), axis=-1)) + mx[..., 0]


def log_pdf_marginal_h1(E, h2: float, p: LikelihoodParams):
    """Exact per-node H1 log-density for squared gain ``h2``.

    The energy is a sum of ``M`` independent exponentials with means
    ``(lam_m h2 + sigma_v2)/beta``. Distinct, well-separated means use the
    partial-fraction form with signed log-sum-exp; all-equal means use the
    Gamma law; clustered means use an exact positive Gamma-mixture series
    (see :func:`marginal_h1_method`).
    """
    E = np.asarray(E, dtype=float)
    a = _marginal_scales(float(h2), p)
    method = marginal_h1_method(float(h2), p)
    if method == "gamma":
        out = _log_gamma_pdf(E, p.M, float(a.mean()))
    elif method == "partial-fractions":
        sign, logw = _pf_log_weights(a)
        terms = logw - np.log(a) - E[..., None] / a
        mx = np.max(terms, axis=-1, keepdims=True)
        s = np.sum(sign * np.exp(terms - mx), axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.log(np.maximum(s, 0.0)) + mx[..., 0]
        # where the alternating sum cancels (small E) redo with the positive series
        bad = s < _PF_CANCEL
        if np.any(bad):
            out = np.where(bad, _gamma_series_log_pdf(E, a), out)
    else:
        out = _gamma_series_log_pdf(E, a)
    out = np.where(E < 0, -np.inf, out)
    return out if np.ndim(out) else float(out)
