"""
Monte Carlo campaigns: complementary ROC tables, miss-detection versus SNR,
and table emission (CSV / JSON with round-trip exact floats).

Trial ``t`` of a campaign always draws from ``RngStream(seed, t, (phase,))``,
so results do not depend on the number of worker threads or on how trials
are grouped into blocks.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .detectors import DetectorKind, compute_statistics, quantile_threshold, wilson_interval
from .errors import ConfigError
from .likelihoods import LikelihoodParams
from .measurement import simulate_trial
from .numerics import RngStream
from .scenario import PRESETS, ScenarioConfig, config_from_dict

__all__ = [
    "ExperimentSpec",
    "Table",
    "CROC_COLUMNS",
    "PHASE_TRIALS",
    "PHASE_CALIBRATION",
    "PHASE_VALIDATION",
    "h0_statistics",
    "run_croc",
    "run_pmd_vs_snr",
    "emit",
    "render",
    "read_table",
    "load_experiment",
    "resolve_threads",
]

PHASE_TRIALS = 0
PHASE_CALIBRATION = 1
PHASE_VALIDATION = 2

BLOCK = 250  # trials per work unit
THREADS_ENV = "WSNSENSE_THREADS"

CROC_COLUMNS = ("detector", "snr_db", "pfa_target", "pfa_emp", "pmd_emp", "ci_lo", "ci_hi",
                "n_trials", "seed")

ALL_DETECTORS = tuple(DetectorKind)


def resolve_threads(threads: Optional[int] = None) -> int:
    """Worker count: explicit value, else ``$WSNSENSE_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else 1
    if threads < 1:
        raise ConfigError("thread count must be >= 1")
    return int(threads)


@dataclass(frozen=True)
class ExperimentSpec:
    """A Monte Carlo campaign.

    ``n_calib`` H0 trials (independent of the ``n_trials`` experiment trials)
    set one threshold per detector and false-alarm target.
    """

    scenario: ScenarioConfig
    detectors: tuple = ALL_DETECTORS
    pfa_grid: tuple = (0.01, 0.05, 0.1, 0.2, 0.5)
    snr_grid_db: tuple = ()
    n_trials: int = 1000
    n_calib: int = 100_000
    out: Optional[str] = None
    fmt: str = "csv"
    threads: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "detectors", tuple(DetectorKind.parse(d) for d in self.detectors))
        object.__setattr__(self, "pfa_grid", tuple(float(v) for v in self.pfa_grid))
        object.__setattr__(self, "snr_grid_db", tuple(float(v) for v in self.snr_grid_db))
        self.validate()

    def validate(self):
        if not self.detectors:
            raise ConfigError("no detectors requested")
        g = self.pfa_grid
        if not g or any(not 0 < v < 1 for v in g) or any(b <= a for a, b in zip(g, g[1:])):
            raise ConfigError("pfa_grid must be strictly increasing inside (0, 1)")
        if self.n_trials < 100:
            raise ConfigError("n_trials must be >= 100")
        if self.n_calib < 1:
            raise ConfigError("n_calib must be >= 1")
        if self.fmt not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.scenario.fading == "fast" and self.scenario.window_len < 2:
            raise ConfigError("fast-fading likelihoods need window_len >= 2")

    @property
    def seed(self) -> int:
        return int(self.scenario.master_seed)

    def replace(self, **changes) -> "ExperimentSpec":
        return dataclasses.replace(self, **changes)


@dataclass
class Table:
    """Rows of plain values under a fixed column order."""

    columns: tuple
    rows: list = field(default_factory=list)

    def column(self, name) -> list:
        return [r[name] for r in self.rows]

    def select(self, **match) -> list:
        return [r for r in self.rows if all(r[k] == v for k, v in match.items())]


# ---------------------------------------------------------------------------
# Trial blocks
# ---------------------------------------------------------------------------

def _params(cfg: ScenarioConfig) -> LikelihoodParams:
    return LikelihoodParams(cfg.window_len, cfg.beta, cfg.sigma_v2)


def _block(cfg: ScenarioConfig, kinds, seed: int, phase: int, start: int, stop: int,
           with_h1: bool):
    p = _params(cfg)
    trials = [simulate_trial(cfg, RngStream(seed, t, (phase,)), with_h1=with_h1)
              for t in range(start, stop)]
    c = np.stack([t.c_true for t in trials])
    d = np.stack([t.d_true for t in trials])
    s0 = compute_statistics(kinds, np.stack([t.e0 for t in trials]), p, c, d)
    s1 = compute_statistics(kinds, np.stack([t.e1 for t in trials]), p, c, d) if with_h1 else None
    return s0, s1


def _run_blocks(cfg, kinds, seed, phase, n, with_h1, threads):
    bounds = [(a, min(n, a + BLOCK)) for a in range(0, n, BLOCK)]
    work = lambda ab: _block(cfg, kinds, seed, phase, ab[0], ab[1], with_h1)  # noqa: E731
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(ab) for ab in bounds]
    # concatenation in block order keeps aggregates independent of scheduling
    s0 = {k: np.concatenate([pt[0][k] for pt in parts]) for k in kinds}
    s1 = {k: np.concatenate([pt[1][k] for pt in parts]) for k in kinds} if with_h1 else None
    return s0, s1


def h0_statistics(cfg: ScenarioConfig, kinds, n_runs: int, seed: int,
                  phase: int = PHASE_CALIBRATION, threads: Optional[int] = None) -> dict:
    """Detector statistics on ``n_runs`` simulated H0 trials of ``cfg``."""
    kinds = tuple(DetectorKind.parse(k) for k in kinds)
    return _run_blocks(cfg, kinds, seed, phase, n_runs, False, resolve_threads(threads))[0]


def _croc_rows(kinds, cal, s0, s1, pfa_grid, snr_db, n_trials, seed):
    rows = []
    for k in kinds:
        for pfa in pfa_grid:
            tau = quantile_threshold(cal[k], pfa)
            n_fa = int(np.sum(s0[k] > tau))
            n_md = int(np.sum(~(s1[k] > tau)))
            lo, hi = wilson_interval(n_md, n_trials)
            rows.append({"detector": k.value, "snr_db": float(snr_db), "pfa_target": float(pfa),
                         "pfa_emp": n_fa / n_trials, "pmd_emp": n_md / n_trials,
                         "ci_lo": lo, "ci_hi": hi, "n_trials": int(n_trials), "seed": int(seed),
                         "threshold": tau})
    return rows


def run_croc(spec: ExperimentSpec, *, _cal=None) -> Table:
    """Complementary ROC: empirical (Pfa, Pmd) of every detector at every target Pfa.

    Thresholds come from ``spec.n_calib`` independent H0 trials; the
    ``spec.n_trials`` experiment trials each simulate both hypotheses on a
    common scenario realization.
    """
    cfg = spec.scenario
    threads = resolve_threads(spec.threads)
    kinds = spec.detectors
    cal = _cal if _cal is not None else h0_statistics(cfg, kinds, spec.n_calib, spec.seed,
                                                      PHASE_CALIBRATION, threads)
    s0, s1 = _run_blocks(cfg, kinds, spec.seed, PHASE_TRIALS, spec.n_trials, True, threads)
    rows = _croc_rows(kinds, cal, s0, s1, spec.pfa_grid, cfg.snr_db, spec.n_trials, spec.seed)
    for r in rows:
        r.pop("threshold")
    return Table(CROC_COLUMNS, rows)


def run_pmd_vs_snr(spec: ExperimentSpec) -> Table:
    """Miss-detection probability versus SNR at a single target Pfa.

    H0 statistics of the detectors that do not use channel side information
    are SNR independent, so their calibration runs are shared across SNRs.
    """
    if len(spec.pfa_grid) != 1:
        raise ConfigError("pmd-vs-snr needs exactly one target Pfa")
    if not spec.snr_grid_db:
        raise ConfigError("snr_grid_db is empty")
    threads = resolve_threads(spec.threads)
    blind = tuple(k for k in spec.detectors if not k.needs_side_info)
    genie = tuple(k for k in spec.detectors if k.needs_side_info)
    shared = h0_statistics(spec.scenario, blind, spec.n_calib, spec.seed, PHASE_CALIBRATION,
                           threads) if blind else {}
    rows = []
    for snr in spec.snr_grid_db:
        sub = spec.replace(scenario=spec.scenario.replace(snr_db=snr))
        cal = dict(shared)
        if genie:
            cal.update(h0_statistics(sub.scenario, genie, spec.n_calib, spec.seed,
                                     PHASE_CALIBRATION, threads))
        rows.extend(run_croc(sub, _cal=cal).rows)
    return Table(CROC_COLUMNS, rows)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _as_table(results) -> Table:
    if isinstance(results, Table):
        return results
    rows = list(results)
    if not rows:
        raise ValueError("cannot infer columns of an empty row list; pass a Table")
    first = rows[0]
    if dataclasses.is_dataclass(first):
        cols = tuple(f.name for f in dataclasses.fields(first))
        return Table(cols, [{c: getattr(r, c) for c in cols} for r in rows])
    cols = tuple(first.keys())
    return Table(cols, [dict(r) for r in rows])


def _fmt_csv(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _fmt_json(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}" if math.isfinite(v) else "null"
    return json.dumps(str(v))


def render(results, fmt: str = "csv") -> str:
    """Text of :func:`emit` without touching the file system."""
    table = _as_table(results)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(table.columns)
        for r in table.rows:
            w.writerow([_fmt_csv(r[c]) for c in table.columns])
        return buf.getvalue()
    if fmt == "json":
        lines = []
        for r in table.rows:
            items = ", ".join(f"{json.dumps(c)}: {_fmt_json(r[c])}" for c in table.columns)
            lines.append("  {" + items + "}")
        return "[\n" + ",\n".join(lines) + ("\n" if lines else "") + "]\n"
    raise ValueError(f"unknown format {fmt!r}")


def emit(results, path, fmt: str = "csv") -> Path:
    """Write a table as CSV (header + rows) or JSON (array of row objects).

    Floats are written with 17 significant digits, so reading the file back
    recovers every value exactly. An empty :class:`Table` gives a header-only
    CSV (or ``[]``).
    """
    text = render(results, fmt)
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def _parse_cell(s: str):
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            pass
    return s


def read_table(path, fmt: Optional[str] = None) -> Table:
    """Parse a file written by :func:`emit`."""
    path = Path(path)
    fmt = fmt or ("json" if path.suffix.lower() == ".json" else "csv")
    if fmt == "json":
        data = json.loads(path.read_text())
        cols = tuple(data[0].keys()) if data else ()
        rows = [{k: (float("nan") if v is None else v) for k, v in r.items()} for r in data]
        return Table(cols, rows)
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        cols = tuple(next(rd))
        rows = [dict(zip(cols, map(_parse_cell, rec))) for rec in rd]
    return Table(cols, rows)


# ---------------------------------------------------------------------------
# Configuration files
# ---------------------------------------------------------------------------

_EXPERIMENT_KEYS = {"detectors", "pfa_grid", "snr_grid_db", "n_trials", "n_calib",
                    "n_values", "n_samples", "preset", "bound_fading"}


def _read_mapping(path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        try:
            return tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"bad TOML in {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"bad JSON in {path}: {exc}") from exc


def load_experiment(path) -> tuple[ScenarioConfig, dict]:
    """Read ``[scenario]`` and ``[experiment]`` tables from a TOML/JSON file.

    ``experiment.preset`` names a base scenario from :data:`PRESETS` that the
    ``scenario`` keys override. Unknown keys in either table are errors.
    """
    data = _read_mapping(path)
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table/object")
    unknown = set(data) - {"scenario", "experiment"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    exp = dict(data.get("experiment", {}))
    bad = set(exp) - _EXPERIMENT_KEYS
    if bad:
        raise ConfigError(f"unknown experiment keys: {sorted(bad)}")
    preset = exp.pop("preset", None)
    scen = dict(data.get("scenario", {}))
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}")
        base = PRESETS[preset].to_dict()
        if "window_len" not in scen and ("bandwidth" in scen or "window_time" in scen):
            base.pop("window_len")
        base.update(scen)
        scen = base
    return config_from_dict(scen), exp
