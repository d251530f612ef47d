"""
Numerical building blocks: log-domain special functions, small Hermitian
linear algebra, seeded random streams and bounded scalar maximization.

Everything here is a pure function of its inputs. Vectorized routines accept
NumPy arrays and broadcast over the argument ``x``; the order/shape parameter
is a scalar.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .errors import NoConvergence, NonFinite, NotPSD

__all__ = [
    "RngStream",
    "cholesky_psd",
    "hermitian_eigenvalues",
    "log_bessel_i",
    "log_gamma_lower_regularized",
    "sample_complex_gaussian",
    "maximize_scalar_bounded",
    "maximize_bounded_batch",
    "toeplitz_hermitian",
]


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

@dataclass
class RngStream:
    """Independent, reproducible random stream keyed by ``(master_seed, stream_id, path)``.

    The stream id is typically the Monte Carlo trial index and ``path`` a
    tuple of small integers naming the use of the stream (experiment phase,
    noise vs. source draws, ...). Streams with the same key produce
    bit-identical sequences; different keys are statistically independent
    (NumPy ``SeedSequence`` spawn keys).
    """

    master_seed: int
    stream_id: int = 0
    path: tuple = ()
    gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self.path = tuple(int(t) for t in self.path)
        key = (int(self.stream_id) & (2**64 - 1),) + self.path
        ss = np.random.SeedSequence(int(self.master_seed) & (2**64 - 1), spawn_key=key)
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, stream_id: int) -> "RngStream":
        """Stream with the same master seed and path but another id."""
        return RngStream(self.master_seed, stream_id, self.path)

    def purpose(self, tag: int) -> "RngStream":
        """Independent sub-stream for a separate use (appends ``tag`` to the path)."""
        return RngStream(self.master_seed, self.stream_id, self.path + (int(tag),))


def sample_complex_gaussian(factor: np.ndarray, rng: RngStream, size=None) -> np.ndarray:
    """Draw ``factor @ w`` with ``w`` i.i.d. CN(0, 1).

    Parameters
    ----------
    factor : (M, M) array
        Lower-triangular factor of the target covariance.
    rng : RngStream
    size : int or tuple, optional
        Leading batch shape. The result has shape ``size + (M,)``.
    """
    factor = np.asarray(factor)
    m = factor.shape[0]
    shape = (m,) if size is None else tuple(np.atleast_1d(size)) + (m,)
    w = (rng.gen.standard_normal(shape) + 1j * rng.gen.standard_normal(shape)) * math.sqrt(0.5)
    return w @ factor.T


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------

def toeplitz_hermitian(first_row) -> np.ndarray:
    """Hermitian Toeplitz matrix from its first row."""
    r = np.asarray(first_row)
    m = r.size
    idx = np.arange(m)
    lag = idx[None, :] - idx[:, None]
    out = np.where(lag >= 0, r[np.abs(lag)], np.conj(r[np.abs(lag)]))
    return out


def _check_hermitian(a: np.ndarray, atol: float = 1e-12) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(np.max(np.abs(a)), 1.0) if a.size else 1.0
    if np.max(np.abs(a - a.conj().T), initial=0.0) > atol * scale:
        raise ValueError("matrix is not Hermitian")
    return a


def cholesky_psd(a: np.ndarray) -> np.ndarray:
    """Cholesky factor ``L`` with ``L @ L^H == a`` for a Hermitian PSD matrix.

    Pivots in ``[-tol, tol]`` with ``tol = 1e-12 * trace / dim`` are clipped
    to zero and the corresponding column is zeroed, which yields a valid
    semidefinite factor for singular inputs.

    Raises
    ------
    NotPSD
        If a pivot is below ``-tol``.
    """
    a = _check_hermitian(a)
    n = a.shape[0]
    cplx = np.iscomplexobj(a)
    lf = np.zeros((n, n), dtype=complex if cplx else float)
    tol = 1e-12 * abs(np.trace(a).real) / max(n, 1)
    for j in range(n):
        row = lf[j, :j]
        d = a[j, j].real - np.real(np.vdot(row, row))
        if d < -tol:
            raise NotPSD(f"pivot {d:.3e} at index {j} below -{tol:.3e}")
        if d <= tol:
            continue
        ljj = math.sqrt(d)
        lf[j, j] = ljj
        if j + 1 < n:
            lf[j + 1:, j] = (a[j + 1:, j] - lf[j + 1:, :j] @ row.conj()) / ljj
    return lf


def hermitian_eigenvalues(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations, ascending.

    Sweeps stop once the off-diagonal Frobenius norm falls below
    ``tol * ||a||_F``.

    Raises
    ------
    NoConvergence
        After ``max_sweeps`` sweeps without meeting the threshold.
    """
    a = np.array(_check_hermitian(a), dtype=complex)
    n = a.shape[0]
    if n == 1:
        return np.array([a[0, 0].real])
    fro = np.linalg.norm(a)
    if fro == 0.0:
        return np.zeros(n)
    thresh = tol * fro
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= thresh:
            return np.sort(np.diag(a).real)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r <= 1e-300:
                    continue
                phase = apq / r
                app, aqq = a[p, p].real, a[q, q].real
                theta = (aqq - app) / (2.0 * r)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # U = diag(1, conj(phase)) @ [[c, s], [-s, c]]
                u = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                cols = a[:, [p, q]] @ u
                a[:, p], a[:, q] = cols[:, 0], cols[:, 1]
                rows = u.conj().T @ a[[p, q], :]
                a[p, :], a[q, :] = rows[0], rows[1]
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
    raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")


# ---------------------------------------------------------------------------
# Modified Bessel function of the first kind, log domain
# ---------------------------------------------------------------------------

def _debye_polynomials(n_terms: int) -> list[np.ndarray]:
    """Coefficients (ascending powers of t) of the Debye polynomials u_k(t)."""
    polys = [[Fraction(1)]]
    for _ in range(n_terms - 1):
        u = polys[-1]
        # 1/2 t^2 (1 - t^2) u'(t)
        du = [k * c for k, c in enumerate(u)][1:]
        a = [Fraction(0)] * (len(du) + 4)
        for k, c in enumerate(du):
            a[k + 2] += c / 2
            a[k + 4] -= c / 2
        # 1/8 int_0^t (1 - 5 s^2) u(s) ds
        w = [Fraction(0)] * (len(u) + 2)
        for k, c in enumerate(u):
            w[k] += c
            w[k + 2] -= 5 * c
        b = [Fraction(0)] + [c / (8 * (k + 1)) for k, c in enumerate(w)]
        size = max(len(a), len(b))
        nxt = [(a[k] if k < len(a) else 0) + (b[k] if k < len(b) else 0) for k in range(size)]
        polys.append(nxt)
    return [np.array([float(c) for c in p]) for p in polys]


_DEBYE = _debye_polynomials(16)
# Orders at or above this use the uniform expansion directly.
_DEBYE_MIN_ORDER = 40
# Largest order for which the power series is used below the seam.
_SERIES_MAX_ORDER = 2000


def _log_bessel_series(nu: int, x: np.ndarray) -> np.ndarray:
    q = 0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    k = 0
    while True:
        k += 1
        term = term * (q / (k * (k + nu)))
        total = total + term
        if k > 4 and np.all(term <= 1e-17 * total):
            break
        if k > 100000:
            raise NoConvergence("Bessel power series did not converge")
    return nu * np.log(0.5 * x) - gammaln(nu + 1.0) + np.log(total)


@lru_cache(maxsize=64)
def _debye_combined(nu: float) -> np.ndarray:
    # sum_k u_k(t) nu^-k collapsed into one polynomial in t
    size = max(len(p) for p in _DEBYE)
    out = np.zeros(size)
    for k, poly in enumerate(_DEBYE):
        out[:len(poly)] += poly / nu**k
    return out


def _log_bessel_debye(nu: float, x: np.ndarray) -> np.ndarray:
    z = x / nu
    s = np.sqrt(1.0 + z * z)
    t = 1.0 / s
    eta = s + np.log(z / (1.0 + s))
    acc = np.zeros_like(x)
    for coef in _debye_combined(nu)[::-1]:
        acc = acc * t + coef
    return nu * eta - 0.5 * math.log(2.0 * math.pi * nu) + 0.5 * np.log(t) + np.log(acc)


def _log_bessel_recurrence(nu: int, x: np.ndarray) -> np.ndarray:
    top = _DEBYE_MIN_ORDER
    log_hi = _log_bessel_debye(float(top + 1), x)
    log_cur = _log_bessel_debye(float(top), x)
    # ratio = I_{k} / I_{k+1}; I_{k-1}/I_k = 1/ratio + 2k/x
    ratio = np.exp(log_cur - log_hi)
    for k in range(top, nu, -1):
        step = 1.0 / ratio + 2.0 * k / x
        log_cur = log_cur + np.log(step)
        ratio = step
    return log_cur


def log_bessel_i(order: int, x):
    """Natural log of the modified Bessel function ``I_order(x)``.

    Uses the power series for ``x < 0.8 (order + 1)``, the Debye uniform
    expansion above the seam for ``order >= 40``, and for lower orders above
    the seam a downward recurrence started from the expansion at orders 40
    and 41 (downward recurrence is stable for ``I``). Never forms ``I``
    itself, so large orders do not overflow.

    Parameters
    ----------
    order : int
        Non-negative integer order.
    x : float or array_like
        Non-negative argument.

    Returns
    -------
    float or ndarray
        ``log I_order(x)``; ``-inf`` where ``x == 0`` and ``order >= 1``.
    """
    nu = int(order)
    if nu < 0:
        raise ValueError("order must be non-negative")
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xa)
    zero = xa == 0.0
    out[zero] = 0.0 if nu == 0 else -np.inf
    pos = ~zero
    seam = 0.8 * (nu + 1)
    if nu <= _SERIES_MAX_ORDER:
        ser = pos & (xa < seam)
    else:
        ser = np.zeros_like(pos)
    asym = pos & ~ser
    if ser.any():
        out[ser] = _log_bessel_series(nu, xa[ser])
    if asym.any():
        if nu >= _DEBYE_MIN_ORDER:
            out[asym] = _log_bessel_debye(float(nu), xa[asym])
        else:
            out[asym] = _log_bessel_recurrence(nu, xa[asym])
    return float(out[0]) if scalar else out.reshape(np.shape(x))


# ---------------------------------------------------------------------------
# Regularized lower incomplete gamma, log domain
# ---------------------------------------------------------------------------

def _log_gamma_p_series(a: float, x: np.ndarray) -> np.ndarray:
    term = np.full_like(x, 1.0 / a)
    total = term.copy()
    n = 0
    while True:
        n += 1
        term = term * x / (a + n)
        total = total + term
        if np.all(term <= 1e-17 * total):
            break
        if n > 100000:
            raise NoConvergence("incomplete gamma series did not converge")
    return -x + a * np.log(x) - gammaln(a) + np.log(total)


def _log_gamma_q_cf(a: float, x: np.ndarray) -> np.ndarray:
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    tiny = 1e-300
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    i = 0
    while True:
        i += 1
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = b + an / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) <= 1e-15):
            break
        if i > 100000:
            raise NoConvergence("incomplete gamma continued fraction did not converge")
    return -x + a * np.log(x) - gammaln(a) + np.log(h)


def log_gamma_lower_regularized(a: float, x):
    """Natural log of ``P(a, x) = gamma(a, x) / Gamma(a)``.

    Series for ``x < a + 1``, continued fraction for ``Q = 1 - P`` otherwise.
    Returns ``-inf`` at ``x == 0``.
    """
    a = float(a)
    if not a > 0:
        raise ValueError("shape a must be positive")
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xa)
    zero = xa <= 0.0
    out[zero] = -np.inf
    big = np.isinf(xa)
    out[big] = 0.0
    ser = ~zero & ~big & (xa < a + 1.0)
    cf = ~zero & ~big & ~ser
    if ser.any():
        out[ser] = _log_gamma_p_series(a, xa[ser])
    if cf.any():
        out[cf] = np.log1p(-np.exp(_log_gamma_q_cf(a, xa[cf])))
    return float(out[0]) if scalar else out.reshape(np.shape(x))


# ---------------------------------------------------------------------------
# Bounded scalar maximization
# ---------------------------------------------------------------------------

_GOLD = 0.5 * (3.0 - math.sqrt(5.0))


def maximize_scalar_bounded(f: Callable[[float], float], lo: float, hi: float,
                            x0: float | None = None, tol: float = 1e-8,
                            max_iter: int = 500) -> tuple[float, float]:
    """Maximize ``f`` on ``[lo, hi]`` with Brent's method.

    Golden-section steps are mixed with parabolic interpolation. The two
    endpoints and ``x0`` are also evaluated so that boundary maxima are
    returned exactly.

    Returns
    -------
    (argmax, max_value)

    Raises
    ------
    NonFinite
        If ``f`` returns NaN inside the bracket.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")

    def g(v):
        fv = f(v)
        if np.isnan(fv):
            raise NonFinite(f"objective is NaN at {v!r}")
        return -fv

    a, b = lo, hi
    if x0 is None or not (lo < x0 < hi):
        x = a + _GOLD * (b - a)
    else:
        x = float(x0)
    w = v = x
    fx = fw = fv = g(x)
    d = e = 0.0
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        tol1 = tol * abs(x) + 1e-12
        tol2 = 2.0 * tol1
        if abs(x - m) <= tol2 - 0.5 * (b - a):
            break
        use_golden = True
        if abs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            if abs(p) < abs(0.5 * q * e) and q * (a - x) < p < q * (b - x):
                e, d = d, p / q
                u = x + d
                if u - a < tol2 or b - u < tol2:
                    d = tol1 if x < m else -tol1
                use_golden = False
        if use_golden:
            e = (a - x) if x >= m else (b - x)
            d = _GOLD * e
        u = x + (d if abs(d) >= tol1 else math.copysign(tol1, d))
        fu = g(u)
        if fu <= fx:
            if u >= x:
                a = x
            else:
                b = x
            v, fv, w, fw, x, fx = w, fw, x, fx, u, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, fv, w, fw = w, fw, u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    best_x, best_f = x, fx
    for cand in (lo, hi) + (() if x0 is None else (float(x0),)):
        fc = g(cand)
        if fc < best_f:
            best_x, best_f = cand, fc
    return best_x, -best_f


def maximize_bounded_batch(f: Callable[[np.ndarray], np.ndarray], lo, hi,
                           tol: float = 1e-7, max_iter: int = 200):
    """Golden-section maximization of many independent 1-D problems at once.

    ``f`` maps a vector of abscissae (one per problem) to a vector of
    objective values. Each problem is assumed unimodal on its bracket; the
    endpoints are evaluated too so boundary maxima are caught.

    Returns
    -------
    (argmax, max_value) : ndarrays
    """
    a = np.array(lo, dtype=float)
    b = np.array(hi, dtype=float)
    ratio = 1.0 - _GOLD
    c = b - ratio * (b - a)
    d = a + ratio * (b - a)
    fc = f(c)
    fd = f(d)
    for _ in range(max_iter):
        # each problem stops on its own bracket, so its result does not depend
        # on which other problems share the batch
        run = b - a > tol * (1.0 + np.abs(a) + np.abs(b))
        if not np.any(run):
            break
        left = fc >= fd
        # left: keep [a, d], old c becomes the new d; else keep [c, b], old d becomes new c
        na, nb = np.where(left, a, c), np.where(left, d, b)
        probe = np.where(left, nb - ratio * (nb - na), na + ratio * (nb - na))
        probe = np.where(run, probe, c)
        fp = f(probe)
        nc, nd = np.where(left, probe, d), np.where(left, c, probe)
        nfc, nfd = np.where(left, fp, fd), np.where(left, fc, fp)
        a, b = np.where(run, na, a), np.where(run, nb, b)
        c, d = np.where(run, nc, c), np.where(run, nd, d)
        fc, fd = np.where(run, nfc, fc), np.where(run, nfd, fd)
    x = np.where(fc >= fd, c, d)
    fx = np.maximum(fc, fd)
    if np.any(np.isnan(fx)):
        raise NonFinite("objective is NaN inside the bracket")
    for edge in (np.array(lo, dtype=float), np.array(hi, dtype=float)):
        fe = f(edge)
        better = fe > fx
        x = np.where(better, edge, x)
        fx = np.where(better, fe, fx)
    return x, fx
