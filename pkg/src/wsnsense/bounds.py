"""
Error of the factorized likelihood: an importance-sampled estimate of the
L1 distance between the exact and the factorized joint characteristic
functions, its closed-form upper bound, and the bound-versus-N experiment.

Both quantities bound ``sup |p1 - p1_hat|`` through
``(2 pi)^-N  int |Psi1(w) - Psi1_hat(w)| dw``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln
from scipy.stats import t as student_t

from .errors import DegenerateProposal, InvalidParam
from .likelihoods import LikelihoodParams, cf_ff_avg, cf_h1_approx, cf_h1_exact
from .numerics import RngStream
from .scenario import ScenarioConfig, channel_variance, place_nodes, solve_source_power

__all__ = [
    "BoundEstimate",
    "BoundRow",
    "cf_l1_distance_mc",
    "analytic_error_bound",
    "bound_vs_n_experiment",
    "write_bound_table",
    "BOUND_COLUMNS",
]

_CHUNK = 50_000


@dataclass(frozen=True)
class BoundEstimate:
    value: float
    stderr: float
    n_samples: int
    method: str

    def __post_init__(self):
        if self.value < 0 or self.stderr < 0:
            raise ValueError("bound estimates are nonnegative")


def _proposal(p: LikelihoodParams):
    if p.M < 2:
        raise DegenerateProposal("the Student-t proposal needs M >= 2 (nu = M - 1 >= 1)")
    nu = p.M - 1
    scale = p.beta / (p.sigma_v2 * math.sqrt(nu))
    return nu, scale


def cf_l1_distance_mc(p: LikelihoodParams, n_samples: int, rng: RngStream, *,
                      h=None, variances=None, k_h: int = 100,
                      self_test: bool = False) -> BoundEstimate:
    """Importance-sampling estimate of ``(2 pi)^-N int |Psi1 - Psi1_hat| dw``.

    Each coordinate of ``w`` is drawn from a Student-t with ``M - 1`` degrees of
    freedom and scale ``beta / (sigma_v2 sqrt(M - 1))``, whose density is
    proportional to ``(1 + sigma_v2^2 w^2 / beta^2)^(-M/2)``, the envelope of
    both CFs; the importance weights are therefore bounded.

    Slow fading: pass the gains ``h`` (length N). Fast fading: pass the channel
    ``variances``; the exact CF is then averaged over ``k_h`` fresh Rayleigh
    draws per ``w`` sample and compared with the product of the averaged
    per-node CFs.

    ``self_test=True`` compares the factorized CF with itself (result 0).
    """
    if n_samples < 2:
        raise InvalidParam("need at least two samples")
    if (h is None) == (variances is None):
        raise InvalidParam("pass exactly one of h (slow fading) or variances (fast fading)")
    nu, scale = _proposal(p)
    if h is not None:
        h = np.asarray(h, dtype=complex).ravel()
        n_nodes = h.size
    else:
        variances = np.asarray(variances, dtype=float).ravel()
        n_nodes = variances.size
        if p.eigenvalues is None:
            raise InvalidParam("fast-fading distance needs the source eigenvalues")
    log_norm = -n_nodes * math.log(2.0 * math.pi)
    wsum = 0.0
    wsq = 0.0
    done = 0
    gen = rng.gen
    hgen = rng.purpose(1).gen
    while done < n_samples:
        k = min(_CHUNK, n_samples - done)
        tdraw = gen.standard_t(nu, size=(k, n_nodes))
        omega = scale * tdraw
        logq = (student_t.logpdf(tdraw, nu) - math.log(scale)).sum(axis=-1)
        if h is not None:
            approx = cf_h1_approx(omega, h, p)
            exact = approx if self_test else cf_h1_exact(omega, h, p)
        else:
            approx = np.prod(cf_ff_avg(omega, p.trace_s * variances, p), axis=-1)
            if self_test:
                exact = approx
            else:
                z = hgen.standard_normal((k, k_h, n_nodes, 2))
                hh = (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5 * variances)
                exact = cf_h1_exact(omega[:, None, :], hh, p).mean(axis=1)
        with np.errstate(divide="ignore"):
            w = np.exp(np.log(np.abs(exact - approx)) - logq + log_norm)
        wsum += float(w.sum())
        wsq += float((w * w).sum())
        done += k
    mean = wsum / n_samples
    var = max(0.0, (wsq - n_samples * mean * mean) / (n_samples - 1))
    return BoundEstimate(mean, math.sqrt(var / n_samples), n_samples, "mc")


def _log_double_factorial(k: int) -> float:
    """``log(k!!)`` via log-gamma; ``(-1)!! = 0!! = 1``."""
    if k <= 0:
        return 0.0
    if k % 2 == 0:
        l = k // 2
        return l * math.log(2.0) + gammaln(l + 1)
    l = (k + 1) // 2
    return gammaln(2 * l + 1) - l * math.log(2.0) - gammaln(l + 1)


def analytic_error_bound(p: LikelihoodParams, h, n_nodes: Optional[int] = None) -> float:
    """Closed-form bound on ``sup |p1 - p1_hat|`` for even ``M >= 4``.

    ``(2 pi)^-N min{ 2M A^N, delta' M / beta^2 [N(N-1) A^(N-2) B^2 + N A^(N-1) C] }``
    with the one-dimensional integrals

    * ``A = int (1 + s^4 w^2/beta^2)^(-M/2) dw = (M-3)!! beta pi / ((M-2)!! s^2)``
    * ``B = int |w| (1 + s^4 w^2/beta^2)^(-(M+1)/2) dw = 2 beta^2 / (s^4 (M-1))``
    * ``C = int w^2 (1 + s^4 w^2/beta^2)^(-(M+2)/2) dw = (M-3)!! beta^3 pi / (M!! s^6)``

    (``s^2 = sigma_v2``), ``delta = lam_max^2 max|h|^4`` and
    ``delta' = delta exp(lam_max sum|h|^2 / s^2)``.
    """
    M = p.M
    if M % 2:
        raise InvalidParam("the closed-form bound is only available for even M")
    if M < 4:
        raise InvalidParam("the closed-form bound needs M >= 4")
    if p.eigenvalues is None:
        raise InvalidParam("the closed-form bound needs the source eigenvalues")
    h2 = np.abs(np.asarray(h, dtype=complex).ravel()) ** 2
    n = h2.size if n_nodes is None else int(n_nodes)
    if n != h2.size:
        raise InvalidParam("n_nodes does not match the number of gains")
    s2, beta = p.sigma_v2, p.beta
    lam_max = float(np.max(p.eigenvalues))
    ldf3, ldf2, ldf0 = _log_double_factorial(M - 3), _log_double_factorial(M - 2), _log_double_factorial(M)
    log_a = ldf3 - ldf2 + math.log(beta * math.pi / s2)
    log_b = math.log(2.0 * beta**2 / (s2**2 * (M - 1)))
    log_c = ldf3 - ldf0 + math.log(beta**3 * math.pi / s2**3)
    first = math.log(2 * M) + n * log_a
    if lam_max == 0.0 or h2.max() == 0.0:
        return 0.0
    log_delta = 2 * math.log(lam_max) + 2 * math.log(float(h2.max()))
    log_delta_p = log_delta + lam_max * float(h2.sum()) / s2
    parts = [math.log(n) + (n - 1) * log_a + log_c]
    if n >= 2:
        parts.append(math.log(n * (n - 1)) + (n - 2) * log_a + 2 * log_b)
    mx = max(parts)
    log_bracket = mx + math.log(sum(math.exp(v - mx) for v in parts))
    second = log_delta_p + math.log(M) - 2 * math.log(beta) + log_bracket
    return math.exp(min(first, second) - n * math.log(2 * math.pi))


# ---------------------------------------------------------------------------
# Bound versus number of nodes
# ---------------------------------------------------------------------------

BOUND_COLUMNS = ("N", "mc_bound", "mc_stderr", "analytic_bound", "seed", "M", "epsilon")


@dataclass(frozen=True)
class BoundRow:
    N: int
    mc_bound: float
    mc_stderr: float
    analytic_bound: float
    seed: int
    M: int
    epsilon: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in BOUND_COLUMNS}


def bound_vs_n_experiment(cfg: ScenarioConfig, n_values, n_samples: int, rng: RngStream,
                          *, fading: Optional[str] = None, k_h: int = 100) -> list:
    """One scenario realization per ``N``: both bounds, in noise-normalized units.

    The realization (node distances, shadowing, source power from
    ``cfg.snr_db``, Rayleigh gains) is drawn on stream ``rng.child(N)``.
    Powers are divided by the noise variance so that the densities and
    hence the bounds are dimensionless.
    """
    from .measurement import TAG_CHANNEL, TAG_NODES, TAG_SHADOW, build_source

    n_values = [int(v) for v in n_values]
    if any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise InvalidParam("n_values must be strictly increasing")
    fading = fading or cfg.fading
    rows = []
    for n in n_values:
        c = cfg.replace(n_nodes=n)
        stream = rng.child(n)
        layout = place_nodes(c, stream.purpose(TAG_NODES))
        var = channel_variance(layout.distances, c, stream.purpose(TAG_SHADOW))
        power = solve_source_power(c, float(np.mean(var)))
        src = build_source(c, power)
        s2 = c.sigma_v2
        p = LikelihoodParams(c.window_len, c.beta, 1.0, float(src.eigenvalues.sum()) / s2,
                             src.eigenvalues / s2)
        z = stream.purpose(TAG_CHANNEL).gen.standard_normal((n, 2))
        h = (z[:, 0] + 1j * z[:, 1]) * np.sqrt(0.5 * var)
        mc_rng = stream.purpose(10)
        if fading == "fast":
            est = cf_l1_distance_mc(p, n_samples, mc_rng, variances=var, k_h=k_h)
        else:
            est = cf_l1_distance_mc(p, n_samples, mc_rng, h=h)
        try:
            ana = analytic_error_bound(p, h, n)
        except InvalidParam:
            ana = float("nan")
        rows.append(BoundRow(n, est.value, est.stderr, ana, int(rng.master_seed), c.window_len,
                             c.beta_epsilon))
    return rows


def write_bound_table(rows, path, fmt: str = "csv") -> None:
    """Emit the bound table (see :func:`wsnsense.harness.emit`)."""
    from .harness import emit

    emit(rows, path, fmt)
