"""
Hypothesis-test data: Rayleigh channel draws, received windows and the
normalized energies ``E[n, l] = ||y[n, l]||^2 / beta``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .numerics import RngStream, sample_complex_gaussian
from .scenario import (
    OfdmSpec,
    ScenarioConfig,
    SourceModel,
    build_ofdm_source,
    build_source_covariance,
    channel_variance,
    make_ofdm_window,
    place_nodes,
    solve_source_power,
)

__all__ = [
    "ChannelDraw",
    "EnergyMatrix",
    "draw_channels",
    "simulate_energies",
    "draw_source_windows",
    "TrialData",
    "build_source",
    "simulate_trial",
]

H0 = "H0"
H1 = "H1"


@dataclass(frozen=True)
class ChannelDraw:
    """Per-node channel variances (N,) and complex gains (N, L)."""

    variances: np.ndarray
    gains: np.ndarray
    mode: str = "slow"

    @property
    def n_nodes(self) -> int:
        return self.gains.shape[0]

    @property
    def n_windows(self) -> int:
        return self.gains.shape[1]


@dataclass(frozen=True)
class EnergyMatrix:
    """Energies ``values`` (N, L), the normalization ``beta`` used and the hypothesis."""

    values: np.ndarray
    beta: float
    hypothesis: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("energy matrix must be two-dimensional")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("energies must be finite and nonnegative")
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape

    def to_csv(self, path) -> None:
        """Write ``node, window, energy`` rows (0-based indices, 17 significant digits)."""
        n, l = self.values.shape
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "window", "energy"])
            for i in range(n):
                for j in range(l):
                    w.writerow([i, j, f"{self.values[i, j]:.17g}"])

    @classmethod
    def from_csv(cls, path, beta: float, hypothesis: str = H0) -> "EnergyMatrix":
        rows = []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                rows.append((int(rec["node"]), int(rec["window"]), float(rec["energy"])))
        n = 1 + max(r[0] for r in rows)
        l = 1 + max(r[1] for r in rows)
        vals = np.zeros((n, l))
        for i, j, e in rows:
            vals[i, j] = e
        return cls(vals, beta, hypothesis)


def draw_channels(mode: str, variances, n_windows: int, rng: RngStream) -> ChannelDraw:
    """Rayleigh gains ``h ~ CN(0, sigma_n^2)``; constant over windows in slow mode."""
    var = np.asarray(variances, dtype=float)
    if np.any(var <= 0):
        raise ValueError("channel variances must be positive")
    n = var.size
    std = np.sqrt(0.5 * var)
    if mode == "slow":
        z = rng.gen.standard_normal((n, 2))
        h = (z[:, 0] + 1j * z[:, 1]) * std
        gains = np.repeat(h[:, None], n_windows, axis=1)
    elif mode == "fast":
        z = rng.gen.standard_normal((n, n_windows, 2))
        gains = (z[..., 0] + 1j * z[..., 1]) * std[:, None]
    else:
        raise ValueError(f"unknown fading mode {mode!r}")
    return ChannelDraw(var, gains, mode)


def draw_source_windows(src: SourceModel, n_windows: int, rng: RngStream) -> np.ndarray:
    """(L, M) independent source windows, Gaussian via the Cholesky factor or OFDM."""
    if src.ofdm is not None:
        # only the window energy P_s T = trace matters for the scaling
        return make_ofdm_window(src.ofdm, src.trace, 1.0, rng, size=n_windows)
    return sample_complex_gaussian(src.chol, rng, size=n_windows)


def simulate_energies(hyp: str, cfg: ScenarioConfig, src: SourceModel, ch: ChannelDraw,
                      rng: RngStream, *, sigma_v2=None, shared_source: bool = True) -> EnergyMatrix:
    """Energies under ``H0`` or ``H1``.

    Under ``H1`` one source window per ``l`` is shared by every node, which
    is what makes the node energies dependent. ``shared_source=False`` draws
    an independent source per node (test fixture only).

    ``sigma_v2`` overrides the configured noise power (e.g. to work in
    noise-normalized units).
    """
    n, l = ch.gains.shape
    m = cfg.window_len
    beta = cfg.beta
    s2 = cfg.sigma_v2 if sigma_v2 is None else float(sigma_v2)
    zn = rng.purpose(1).gen.standard_normal((n, l, m, 2))
    y = (zn[..., 0] + 1j * zn[..., 1]) * math.sqrt(0.5 * s2)
    if hyp == H1:
        if src.window_len != m:
            raise ValueError("source window length does not match cfg.window_len")
        srng = rng.purpose(2)
        if shared_source:
            s = draw_source_windows(src, l, srng)  # (L, M)
            y = y + ch.gains[:, :, None] * s[None, :, :]
        else:
            s = draw_source_windows(src, n * l, srng).reshape(n, l, m)
            y = y + ch.gains[:, :, None] * s
    elif hyp != H0:
        raise ValueError(f"unknown hypothesis {hyp!r}")
    e = (y.real**2 + y.imag**2).sum(axis=-1) / beta
    return EnergyMatrix(e, beta, hyp)


# ---------------------------------------------------------------------------
# One full Monte Carlo trial
# ---------------------------------------------------------------------------

# sub-stream tags inside a trial stream
TAG_NODES, TAG_SHADOW, TAG_CHANNEL, TAG_H0, TAG_H1 = 1, 2, 3, 4, 5


@dataclass(frozen=True)
class TrialData:
    """Everything drawn in one trial.

    ``c_true`` is ``trace |h_n|^2`` taken from the first window (the slow-fading
    parameter); ``d_true`` is ``trace sigma_n^2``. ``e1`` is ``None`` when only
    the null hypothesis was simulated.
    """

    e0: np.ndarray
    e1: "np.ndarray | None"
    variances: np.ndarray
    gains: np.ndarray
    power: float
    trace: float
    sigma_v2: float
    beta: float

    @property
    def c_true(self) -> np.ndarray:
        return self.trace * np.abs(self.gains[:, 0]) ** 2

    @property
    def d_true(self) -> np.ndarray:
        return self.trace * self.variances


def build_source(cfg: ScenarioConfig, power: float) -> SourceModel:
    """Source model selected by ``cfg.source_kind``."""
    if cfg.source_kind == "ofdm":
        return build_ofdm_source(power, cfg.window_time, OfdmSpec(cfg.n_subcarriers, cfg.cp_len))
    return build_source_covariance(power, cfg.window_time, cfg.window_len, cfg.corr)


def simulate_trial(cfg: ScenarioConfig, rng: RngStream, *, with_h1: bool = True) -> TrialData:
    """Place nodes, draw shadowing and fading, set the source power from the
    per-trial mean channel variance, and simulate the energies."""
    layout = place_nodes(cfg, rng.purpose(TAG_NODES))
    var = channel_variance(layout.distances, cfg, rng.purpose(TAG_SHADOW))
    power = solve_source_power(cfg, float(np.mean(var)))
    src = build_source(cfg, power)
    ch = draw_channels(cfg.fading, var, cfg.n_windows, rng.purpose(TAG_CHANNEL))
    e0 = simulate_energies(H0, cfg, src, ch, rng.purpose(TAG_H0)).values
    e1 = simulate_energies(H1, cfg, src, ch, rng.purpose(TAG_H1)).values if with_h1 else None
    return TrialData(e0, e1, var, ch.gains, power, src.trace, cfg.sigma_v2, cfg.beta)
