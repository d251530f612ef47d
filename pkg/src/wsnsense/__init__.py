"""
Distributed energy detection of a correlated random source in a wireless
sensor network: signal simulation, exact and factorized likelihoods, GLRT
and baseline detectors, approximation-error bounds and Monte Carlo harness.
"""
from . import bounds, detectors, harness, likelihoods, measurement, numerics, scenario
from .errors import (
    ConfigError,
    DegenerateProposal,
    DegenerateSpectrum,
    InsufficientRuns,
    InvalidParam,
    NoConvergence,
    NonFinite,
    NotPSD,
    WsnSenseError,
)

__version__ = "0.1.0"

__all__ = [
    "bounds",
    "detectors",
    "harness",
    "likelihoods",
    "measurement",
    "numerics",
    "scenario",
    "ConfigError",
    "DegenerateProposal",
    "DegenerateSpectrum",
    "InsufficientRuns",
    "InvalidParam",
    "NoConvergence",
    "NonFinite",
    "NotPSD",
    "WsnSenseError",
]
