"""
Scenario ingredients: configuration, node geometry, path-loss/shadowing
channel variances, SNR-to-power mapping and the source models (Toeplitz
Gaussian or OFDM with cyclic prefix).
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError
from .numerics import RngStream, cholesky_psd, toeplitz_hermitian

__all__ = [
    "ScenarioConfig",
    "SourceModel",
    "OfdmSpec",
    "NodeLayout",
    "beta_scaling",
    "noise_variance",
    "place_nodes",
    "channel_variance",
    "solve_source_power",
    "build_source_covariance",
    "build_ofdm_source",
    "make_ofdm_window",
    "load_config",
    "PRESETS",
]

# dBm -> W offset
DBM_OFFSET_DB = -30.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Every free parameter of an experiment.

    Units: ``bandwidth`` Hz, ``window_time`` s, ``noise_psd`` dBm/Hz,
    ``snr_db`` dB, ``pathloss`` dB, ``ref_dist`` m, ``shadow_sigma`` dB,
    ``dist_range`` m. ``window_len`` defaults to ``floor(W T)``.

    ``noise_units`` selects the per-sample noise variance: ``"energy"``
    (default) gives ``N0 W T / M``, the noise energy per sample, which is
    commensurate with a source covariance of trace ``P_s T``; ``"power"``
    gives ``N0 W`` (noise power), which leaves the source energy and the
    noise on different scales.
    """

    n_nodes: int = 100
    n_windows: int = 20
    window_len: Optional[int] = None
    bandwidth: float = 5e6
    window_time: float = 2e-6
    noise_psd: float = -174.0
    snr_db: float = -9.0
    beta_epsilon: float = 0.25
    corr: float = 0.5
    pathloss: float = -37.0
    pathloss_exp: float = 4.0
    ref_dist: float = 10.0
    shadow_sigma: float = 2.0
    dist_range: tuple = (800.0, 8000.0)
    source_kind: str = "gaussian"
    fading: str = "slow"
    master_seed: int = 0
    n_subcarriers: int = 12
    cp_len: int = 3
    noise_units: str = "energy"

    def __post_init__(self):
        if self.window_len is None:
            # small guard so that 5e6 * 2e-6 does not floor to 9
            object.__setattr__(self, "window_len", int(math.floor(self.bandwidth * self.window_time + 1e-9)))
        object.__setattr__(self, "dist_range", tuple(float(v) for v in self.dist_range))
        self.validate()

    def validate(self):
        if self.n_nodes < 1 or self.n_windows < 1 or self.window_len < 1:
            raise ConfigError("n_nodes, n_windows and window_len must be >= 1")
        if not 0.0 < self.beta_epsilon < 0.5:
            raise ConfigError("beta_epsilon must lie in (0, 1/2)")
        if not 0.0 <= self.corr < 1.0:
            raise ConfigError("corr must lie in [0, 1)")
        if len(self.dist_range) != 2 or not 0 < self.dist_range[0] < self.dist_range[1]:
            raise ConfigError("dist_range must be [d_min, d_max] with 0 < d_min < d_max")
        if self.source_kind not in ("gaussian", "ofdm"):
            raise ConfigError(f"unknown source_kind {self.source_kind!r}")
        if self.fading not in ("slow", "fast"):
            raise ConfigError(f"unknown fading {self.fading!r}")
        if self.noise_units not in ("energy", "power"):
            raise ConfigError(f"unknown noise_units {self.noise_units!r}")
        if self.bandwidth <= 0 or self.window_time <= 0:
            raise ConfigError("bandwidth and window_time must be positive")
        if self.source_kind == "ofdm" and self.n_subcarriers + self.cp_len != self.window_len:
            raise ConfigError("ofdm requires n_subcarriers + cp_len == window_len")

    @property
    def beta(self) -> float:
        return beta_scaling(self.window_len, self.beta_epsilon)

    @property
    def sigma_v2(self) -> float:
        return noise_variance(self)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["dist_range"] = list(self.dist_range)
        return d


_KEYS = {f.name for f in dataclasses.fields(ScenarioConfig)}


def config_from_dict(data: dict) -> ScenarioConfig:
    unknown = set(data) - _KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return ScenarioConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ScenarioConfig:
    """Load a :class:`ScenarioConfig` from a ``.toml`` or ``.json`` file.

    A TOML file may hold the keys at top level or under a ``[scenario]`` table.
    """
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"bad TOML in {path}: {exc}") from exc
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table/object")
    if "scenario" in data and isinstance(data["scenario"], dict):
        data = data["scenario"]
    return config_from_dict(data)


PRESETS = {
    # Table-I setting
    "paper": ScenarioConfig(),
    "paper-ff": ScenarioConfig(fading="fast"),
    "paper-ofdm": ScenarioConfig(source_kind="ofdm", window_len=15, window_time=3e-6),
    # desk-scale variants for CI
    "desk": ScenarioConfig(n_nodes=20, n_windows=20),
    "desk-ff": ScenarioConfig(n_nodes=20, n_windows=20, fading="fast", snr_db=-6.0),
    "desk-ofdm": ScenarioConfig(n_nodes=20, n_windows=20, source_kind="ofdm",
                                window_len=15, window_time=3e-6),
}


# ---------------------------------------------------------------------------

def beta_scaling(m: int, eps: float) -> float:
    """Energy normalization ``M ** (1/2 - eps)``."""
    return float(m) ** (0.5 - eps)


def noise_variance(cfg: ScenarioConfig) -> float:
    """Per-complex-sample noise variance.

    ``N0 W T / M`` (J, equal to ``N0`` when ``M = W T``) for
    ``noise_units="energy"``; ``N0 W`` (W) for ``noise_units="power"``.
    """
    n0 = 10.0 ** ((cfg.noise_psd + DBM_OFFSET_DB) / 10.0)
    if cfg.noise_units == "power":
        return n0 * cfg.bandwidth
    return n0 * cfg.bandwidth * cfg.window_time / cfg.window_len


@dataclass(frozen=True)
class NodeLayout:
    distances: np.ndarray
    angles: np.ndarray

    @property
    def positions(self) -> np.ndarray:
        """(N, 2) array of x, y coordinates in metres; the source sits at the origin."""
        return np.column_stack([self.distances * np.cos(self.angles),
                                self.distances * np.sin(self.angles)])


def place_nodes(cfg: ScenarioConfig, rng: RngStream) -> NodeLayout:
    """Distances log-uniform on ``dist_range``, angles uniform on ``[0, pi]``."""
    d_min, d_max = cfg.dist_range
    lo = math.log10(d_min / cfg.ref_dist)
    hi = math.log10(d_max / cfg.ref_dist)
    u = rng.gen.uniform(lo, hi, cfg.n_nodes)
    d = np.clip(cfg.ref_dist * 10.0**u, d_min, d_max)
    angles = rng.gen.uniform(0.0, math.pi, cfg.n_nodes)
    return NodeLayout(d, angles)


def channel_variance(d, cfg: ScenarioConfig, rng: Optional[RngStream] = None, shadow=None):
    """Linear channel variance from path loss and log-normal shadowing.

    ``sigma2_dB = K - 10 alpha log10(d / d0) - eta`` with ``eta ~ N(0, shadow_sigma^2)``.
    Pass ``shadow`` explicitly (dB) to bypass the random draw.
    """
    d = np.asarray(d, dtype=float)
    if shadow is None:
        shadow = 0.0 if rng is None else rng.gen.normal(0.0, cfg.shadow_sigma, d.shape)
    db = cfg.pathloss - 10.0 * cfg.pathloss_exp * np.log10(d / cfg.ref_dist) - shadow
    return 10.0 ** (db / 10.0)


def solve_source_power(cfg: ScenarioConfig, mean_channel_var: float) -> float:
    """Source power ``P_s`` that realizes ``cfg.snr_db`` for the given mean channel variance.

    Inverts ``SNR = sqrt(M) P_s var / (W N0)``.
    """
    if mean_channel_var <= 0:
        raise ValueError("mean channel variance must be positive")
    snr = 10.0 ** (cfg.snr_db / 10.0)
    n0 = 10.0 ** ((cfg.noise_psd + DBM_OFFSET_DB) / 10.0)
    return snr * cfg.bandwidth * n0 / (math.sqrt(cfg.window_len) * mean_channel_var)


@dataclass(frozen=True)
class OfdmSpec:
    n_subcarriers: int = 12
    cp_len: int = 3
    qam_order: int = 64

    @property
    def length(self) -> int:
        return self.n_subcarriers + self.cp_len


@dataclass(frozen=True)
class SourceModel:
    """Source covariance with cached spectrum and factor.

    For an OFDM source the covariance is the exact covariance of the
    generated waveform (rank ``n_subcarriers``) and ``ofdm`` is set.
    """

    kind: str
    covariance: np.ndarray
    eigenvalues: np.ndarray
    trace: float
    chol: np.ndarray
    power: float
    ofdm: Optional[OfdmSpec] = field(default=None)

    @property
    def window_len(self) -> int:
        return self.covariance.shape[0]


def build_source_covariance(power: float, t: float, m: int, rho: float) -> SourceModel:
    """Toeplitz covariance with first row ``(P_s T / M) [1, rho, ..., rho^(M-1)]``."""
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    row = (power * t / m) * rho ** np.arange(m)
    cov = toeplitz_hermitian(row)
    eig = np.clip(np.linalg.eigvalsh(cov), 0.0, None)
    return SourceModel("gaussian", cov, eig, float(np.trace(cov)), cholesky_psd(cov), power)


def _ofdm_synthesis(spec: OfdmSpec) -> np.ndarray:
    """(M, K) matrix mapping subcarrier symbols to the CP-prefixed time window."""
    k = spec.n_subcarriers
    n = np.arange(k)
    # unnormalized inverse DFT divided by sqrt(K): unitary
    f = np.exp(2j * np.pi * np.outer(n, n) / k) / math.sqrt(k)
    return np.vstack([f[k - spec.cp_len:], f])


def build_ofdm_source(power: float, t: float, spec: OfdmSpec = OfdmSpec()) -> SourceModel:
    """OFDM source whose window energy has mean ``P_s T``."""
    syn = _ofdm_synthesis(spec)
    scale2 = power * t / spec.length
    cov = scale2 * (syn @ syn.conj().T)
    cov = 0.5 * (cov + cov.conj().T)
    eig = np.clip(np.linalg.eigvalsh(cov), 0.0, None)
    return SourceModel("ofdm", cov, eig, float(np.trace(cov).real), cholesky_psd(cov), power, spec)


def _qam_alphabet(order: int) -> np.ndarray:
    side = int(round(math.sqrt(order)))
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    pts = (levels[:, None] + 1j * levels[None, :]).ravel()
    return pts / math.sqrt(np.mean(np.abs(pts) ** 2))


def make_ofdm_window(spec: OfdmSpec, power: float, t: float, rng: RngStream, size=None) -> np.ndarray:
    """One (or ``size``) OFDM window(s) of length ``n_subcarriers + cp_len``.

    Uniform unit-power QAM symbols, unitary inverse DFT, cyclic prefix made of
    the last ``cp_len`` samples, scaled so that ``E ||s||^2 = P_s T``.
    """
    alphabet = _qam_alphabet(spec.qam_order)
    shape = (spec.n_subcarriers,) if size is None else tuple(np.atleast_1d(size)) + (spec.n_subcarriers,)
    sym = alphabet[rng.gen.integers(0, alphabet.size, shape)]
    syn = _ofdm_synthesis(spec)
    scale = math.sqrt(power * t / spec.length)
    return scale * (sym @ syn.T)
