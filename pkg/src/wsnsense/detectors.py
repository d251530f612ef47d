"""
Test statistics for fusing node energies: GLRTs with per-node scalar MLEs
for slow and fast fading, their genie-aided (known parameter) versions, and
the baseline detectors (mean, square, maximum eigenvalue, subspace
eigenvalue, selection combining, selection square combining).

Every statistic accepts a single ``(N, L)`` energy matrix or a stack of them
with arbitrary leading batch dimensions ``(..., N, L)``.
"""
from __future__ import annotations

import csv
import enum
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InsufficientRuns, InvalidParam
from .likelihoods import D_FLOOR_REL, LikelihoodParams, log_pdf_ff, log_pdf_h0, log_pdf_sf
from .numerics import RngStream, maximize_bounded_batch, maximize_scalar_bounded

__all__ = [
    "DetectorKind",
    "StandardizedEnergies",
    "DetectorReport",
    "mle_c",
    "mle_d",
    "mle_batch",
    "local_statistic",
    "fuse_local_statistics",
    "node_statistics",
    "glrt_statistic",
    "csi_statistic",
    "standardize",
    "baseline_statistic",
    "statistic",
    "compute_statistics",
    "quantile_threshold",
    "calibrate_threshold",
    "wilson_interval",
    "PARAM_FLOOR_REL",
]

# MLE lower bound for c and d, relative to sigma_v2
PARAM_FLOOR_REL = D_FLOOR_REL


class DetectorKind(str, enum.Enum):
    GLRT_SF = "GLRT-SF"
    GLRT_FF = "GLRT-FF"
    CSI_SF = "CSI-SF"
    CSI_FF = "CSI-FF"
    MD = "MD"
    SD = "SD"
    ME = "ME"
    SSE = "SSE"
    SC = "SC"
    SSC = "SSC"

    @property
    def needs_side_info(self) -> bool:
        return self in (DetectorKind.CSI_SF, DetectorKind.CSI_FF)

    @property
    def mode(self) -> Optional[str]:
        """``"SF"``/``"FF"`` for the likelihood-based detectors, else ``None``."""
        if self in (DetectorKind.GLRT_SF, DetectorKind.CSI_SF):
            return "SF"
        if self in (DetectorKind.GLRT_FF, DetectorKind.CSI_FF):
            return "FF"
        return None

    @classmethod
    def parse(cls, name) -> "DetectorKind":
        if isinstance(name, cls):
            return name
        key = str(name).strip().upper().replace("_", "-")
        for k in cls:
            if k.value == key:
                return k
        raise ValueError(f"unknown detector {name!r}")


BASELINES = (DetectorKind.MD, DetectorKind.SD, DetectorKind.ME, DetectorKind.SSE,
             DetectorKind.SC, DetectorKind.SSC)


def _values(E) -> np.ndarray:
    return np.asarray(getattr(E, "values", E), dtype=float)


def _log_pdf(mode: str):
    if mode == "SF":
        return log_pdf_sf
    if mode == "FF":
        return log_pdf_ff
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# Per-node MLE
# ---------------------------------------------------------------------------

def _normalized(E, p: LikelihoodParams):
    """Energies and parameters in units of the noise power (scale invariance)."""
    s2 = p.sigma_v2
    return _values(E) / s2, LikelihoodParams(p.M, p.beta, 1.0)


def _mle_scalar(E_row, p: LikelihoodParams, mode: str, tol: float) -> float:
    x = np.asarray(E_row, dtype=float).ravel()
    if x.size < 1:
        raise InvalidParam("need at least one energy")
    xn, q = _normalized(x, p)
    logpdf = _log_pdf(mode)
    floor = PARAM_FLOOR_REL
    hi = 10.0 * q.beta * float(xn.max())
    if hi <= floor:
        return 0.0
    mom = max(floor, q.beta * float(xn.mean()) - q.M)

    def objective(theta):
        return float(np.sum(logpdf(xn, math.exp(theta), q)))

    lo_t, hi_t = math.log(floor), math.log(hi)
    best_t, best_f = maximize_scalar_bounded(objective, lo_t, hi_t, x0=math.log(mom), tol=tol)
    # second start: bracket midpoint
    mid_t, mid_f = maximize_scalar_bounded(objective, lo_t, hi_t, x0=0.5 * (lo_t + hi_t), tol=tol)
    if mid_f > best_f:
        best_t, best_f = mid_t, mid_f
    # the null parameter is feasible: the density at c = 0 (or d -> 0) is the H0 law
    if float(np.sum(log_pdf_h0(xn, q))) >= best_f:
        return 0.0
    return math.exp(best_t) * p.sigma_v2


def mle_c(E_row, p: LikelihoodParams, tol: float = 1e-8) -> float:
    """ML estimate of the slow-fading parameter ``c >= 0`` from one node's energies.

    Brent search over ``theta = log c`` on ``[floor, 10 beta max(E)]`` started at
    the method-of-moments point and at the bracket midpoint; ``0`` is returned
    when the H0 law (``c = 0``) is at least as likely as the best interior point.
    """
    return _mle_scalar(E_row, p, "SF", tol)


def mle_d(E_row, p: LikelihoodParams, tol: float = 1e-8) -> float:
    """ML estimate of the fast-fading parameter ``d >= 0`` (see :func:`mle_c`)."""
    return _mle_scalar(E_row, p, "FF", tol)


def mle_batch(E, p: LikelihoodParams, mode: str = "SF", tol: float = 1e-7):
    """Vectorized per-row MLE for energies of shape ``(..., L)``.

    Returns ``(estimate, gain)``, where ``gain`` is the maximized log-likelihood
    ratio against H0 for each row (``>= 0``).

    Rows whose sample mean does not exceed the H0 mean ``M sigma_v2/beta`` have
    their maximum at the null parameter (the log-likelihood is unimodal in the
    parameter and its slope at zero is proportional to the excess mean), so
    only the remaining rows are searched, with batched golden sections.
    """
    x, q = _normalized(E, p)
    shape = x.shape[:-1]
    rows = x.reshape(-1, x.shape[-1])
    logpdf = _log_pdf(mode)
    ll0 = log_pdf_h0(rows, q).sum(axis=-1)
    est = np.zeros(rows.shape[0])
    gain = np.zeros(rows.shape[0])
    active = np.flatnonzero(rows.mean(axis=-1) > q.M / q.beta)
    if active.size:
        xa = rows[active]
        lo = np.full(active.size, math.log(PARAM_FLOOR_REL))
        hi = np.log(10.0 * q.beta * xa.max(axis=-1))

        def objective(theta):
            return logpdf(xa, np.exp(theta)[:, None], q).sum(axis=-1)

        t, f = maximize_bounded_batch(objective, lo, hi, tol=tol)
        g = f - ll0[active]
        pos = g > 0
        est[active] = np.where(pos, np.exp(t) * p.sigma_v2, 0.0)
        gain[active] = np.where(pos, g, 0.0)
    return est.reshape(shape), gain.reshape(shape)


# ---------------------------------------------------------------------------
# GLRT / CSI statistics
# ---------------------------------------------------------------------------

def node_statistics(E, p: LikelihoodParams, mode: str = "SF") -> np.ndarray:
    """Per-node GLRT partial sums ``sum_l log p(E; theta_hat) - log p0(E)``, shape ``(..., N)``."""
    return mle_batch(_values(E), p, mode)[1]


def fuse_local_statistics(partials) -> np.ndarray:
    """Add per-node partial statistics in a fixed (index) order.

    Sequential left-to-right accumulation, so the result depends only on the
    values and their order, never on how the partials were computed.
    """
    partials = np.asarray(partials, dtype=float)
    total = np.zeros(partials.shape[:-1])
    for n in range(partials.shape[-1]):
        total = total + partials[..., n]
    return total if total.ndim else float(total)


def local_statistic(E_row, p: LikelihoodParams, mode: str = "SF") -> float:
    """The statistic a single node computes from its own ``L`` energies."""
    return float(mle_batch(np.asarray(E_row, dtype=float)[None, :], p, mode)[1][0])


def glrt_statistic(E, p: LikelihoodParams, mode: str = "SF"):
    """GLRT statistic (slow ``"SF"`` or fast ``"FF"`` fading), always ``>= 0``."""
    return fuse_local_statistics(node_statistics(E, p, mode))


def csi_statistic(E, p: LikelihoodParams, true_params, mode: str = "SF"):
    """Log-likelihood ratio with the true ``c_n`` (SF) or ``d_n`` (FF) plugged in.

    ``true_params`` has shape ``(..., N)`` matching the energies' leading axes.
    """
    x, q = _normalized(E, p)
    t = np.asarray(true_params, dtype=float)
    if np.any(t < 0):
        raise InvalidParam("true parameters must be nonnegative")
    t = t / p.sigma_v2
    logpdf = _log_pdf(mode)
    ll0 = log_pdf_h0(x, q)
    if mode == "FF":
        # d = 0 is the H0 law; evaluate only where d is positive
        ll1 = np.where(t[..., None] > 0, logpdf(x, np.maximum(t, PARAM_FLOOR_REL)[..., None], q), ll0)
    else:
        ll1 = logpdf(x, t[..., None], q)
    partial = (ll1 - ll0).sum(axis=-1)
    return fuse_local_statistics(partial)


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StandardizedEnergies:
    """``z = (E - mu0)/s0`` and per-node scaled means ``m = sqrt(L) mean_l z``."""

    z: np.ndarray
    m: np.ndarray


def standardize(E, p: LikelihoodParams) -> StandardizedEnergies:
    """Standardize with the exact H0 moments ``mu0 = M s2/beta``, ``s0 = sqrt(M) s2/beta``."""
    x = _values(E)
    z = (x - p.h0_mean) / p.h0_std
    m = math.sqrt(x.shape[-1]) * z.mean(axis=-1)
    return StandardizedEnergies(z, m)


def _sample_cov_eigs(z: np.ndarray) -> np.ndarray:
    """Eigenvalues (ascending) of ``L^-1 sum_l z_l z_l^T`` for ``z`` of shape ``(..., N, L)``."""
    cov = z @ np.swapaxes(z, -1, -2) / z.shape[-1]
    return np.linalg.eigvalsh(cov)


def baseline_statistic(kind, E, p: LikelihoodParams):
    """Baseline detectors.

    MD: mean energy. SD: mean squared energy. ME: largest eigenvalue of the
    sample covariance of the standardized energy vectors. SSE:
    ``sum_n (lam_n^+ - log lam_n^+)`` over ``lam_n^+ = max(0, lam_n - 1) > 0``.
    SC: ``max_n m_n``. SSC: ``sum_n max(m_n, 0)^2``.
    """
    kind = DetectorKind.parse(kind)
    x = _values(E)
    if kind is DetectorKind.MD:
        out = x.mean(axis=(-2, -1))
    elif kind is DetectorKind.SD:
        out = (x * x).mean(axis=(-2, -1))
    elif kind in (DetectorKind.ME, DetectorKind.SSE):
        lam = _sample_cov_eigs(standardize(x, p).z)
        if kind is DetectorKind.ME:
            out = lam[..., -1]
        else:
            lp = np.maximum(lam - 1.0, 0.0)
            with np.errstate(divide="ignore"):
                out = np.where(lp > 0, lp - np.log(np.where(lp > 0, lp, 1.0)), 0.0).sum(axis=-1)
    elif kind is DetectorKind.SC:
        out = standardize(x, p).m.max(axis=-1)
    elif kind is DetectorKind.SSC:
        out = (np.maximum(standardize(x, p).m, 0.0) ** 2).sum(axis=-1)
    else:
        raise ValueError(f"{kind.value} is not a baseline detector")
    return out if np.ndim(out) else float(out)


def statistic(kind, E, p: LikelihoodParams, true_params=None):
    """Evaluate any detector; ``true_params`` is required for the CSI variants."""
    kind = DetectorKind.parse(kind)
    if kind in (DetectorKind.GLRT_SF, DetectorKind.GLRT_FF):
        return glrt_statistic(E, p, kind.mode)
    if kind.needs_side_info:
        if true_params is None:
            raise InvalidParam(f"{kind.value} needs the true channel parameters")
        return csi_statistic(E, p, true_params, kind.mode)
    return baseline_statistic(kind, E, p)


def compute_statistics(kinds, E, p: LikelihoodParams, c_true=None, d_true=None) -> dict:
    """All requested statistics for a batch ``E`` of shape ``(T, N, L)``."""
    out = {}
    for k in map(DetectorKind.parse, kinds):
        side = c_true if k is DetectorKind.CSI_SF else d_true if k is DetectorKind.CSI_FF else None
        out[k] = np.asarray(statistic(k, E, p, side), dtype=float)
    return out


# ---------------------------------------------------------------------------
# Thresholds and reports
# ---------------------------------------------------------------------------

def quantile_threshold(h0_stats, target_pfa: float) -> float:
    """Empirical ``1 - target_pfa`` quantile (linear interpolation of order statistics)."""
    if not 0.0 < target_pfa < 1.0:
        raise ValueError("target_pfa must lie in (0, 1)")
    s = np.asarray(h0_stats, dtype=float)
    if s.size * target_pfa < 20:
        warnings.warn(f"only {s.size} runs for Pfa={target_pfa}: tail quantile is unreliable",
                      InsufficientRuns, stacklevel=2)
    return float(np.quantile(s, 1.0 - target_pfa, method="linear"))


def calibrate_threshold(kind, cfg, p: Optional[LikelihoodParams], target_pfa: float,
                        n_runs: int, rng: RngStream) -> float:
    """Threshold for ``kind`` at ``target_pfa`` from ``n_runs`` simulated H0 trials.

    Each trial draws a full scenario realization (the CSI variants need the
    true channel parameters); trial ``t`` uses ``rng.child(t)``. ``p`` may be
    ``None``, in which case it is built from ``cfg``.
    """
    from .measurement import simulate_trial

    kind = DetectorKind.parse(kind)
    if p is None:
        p = LikelihoodParams(cfg.window_len, cfg.beta, cfg.sigma_v2)
    trials = [simulate_trial(cfg, rng.child(t), with_h1=False) for t in range(n_runs)]
    e0 = np.stack([t.e0 for t in trials])
    c = np.stack([t.c_true for t in trials])
    d = np.stack([t.d_true for t in trials])
    stats = compute_statistics([kind], e0, p, c, d)[kind]
    return quantile_threshold(stats, target_pfa)


def wilson_interval(k: int, n: int, z: float = 1.959963984540054):
    """Wilson score interval for ``k`` successes out of ``n``."""
    if n <= 0:
        return 0.0, 1.0
    ph = k / n
    den = 1.0 + z * z / n
    centre = (ph + z * z / (2 * n)) / den
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class DetectorReport:
    """Outcome of one detector at one target false-alarm rate.

    ``ci_lo``/``ci_hi`` are the Wilson 95% bounds of ``pmd_emp``;
    ``pfa_ci`` is the same for ``pfa_emp``.
    """

    kind: DetectorKind
    pfa_target: float
    threshold: float
    h0_statistic: np.ndarray
    h1_statistic: np.ndarray
    pfa_emp: float = field(init=False)
    pmd_emp: float = field(init=False)
    ci_lo: float = field(init=False)
    ci_hi: float = field(init=False)
    pfa_ci: tuple = field(init=False)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        h0 = np.asarray(self.h0_statistic, dtype=float)
        h1 = np.asarray(self.h1_statistic, dtype=float)
        n_fa = int(np.sum(h0 > self.threshold))
        n_md = int(np.sum(~(h1 > self.threshold)))
        self.pfa_emp = n_fa / h0.size if h0.size else float("nan")
        self.pmd_emp = n_md / h1.size if h1.size else float("nan")
        self.pfa_ci = wilson_interval(n_fa, h0.size)
        self.ci_lo, self.ci_hi = wilson_interval(n_md, h1.size)

    @property
    def decisions(self) -> np.ndarray:
        """H1 decisions on the H1 trials (``statistic > threshold``)."""
        return np.asarray(self.h1_statistic) > self.threshold

    COLUMNS = ("detector", "pfa_target", "threshold", "pfa_emp", "pmd_emp", "ci_lo", "ci_hi")

    def row(self) -> dict:
        return {"detector": self.kind.value, "pfa_target": self.pfa_target,
                "threshold": self.threshold, "pfa_emp": self.pfa_emp,
                "pmd_emp": self.pmd_emp, "ci_lo": self.ci_lo, "ci_hi": self.ci_hi}

    @staticmethod
    def write_csv(reports, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(DetectorReport.COLUMNS)
            for r in reports:
                w.writerow([_fmt(v) for v in r.row().values()])

    @staticmethod
    def write_json(reports, path) -> None:
        with open(path, "w") as fh:
            json.dump([r.row() for r in reports], fh, indent=1)
            fh.write("\n")


def _fmt(v):
    return f"{v:.17g}" if isinstance(v, float) else str(v)
