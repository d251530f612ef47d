"""Exception types raised across the package."""


class WsnSenseError(Exception):
    """Base class for all package errors."""


class NotPSD(WsnSenseError, ValueError):
    """A matrix expected to be positive semidefinite has a clearly negative pivot."""


class NoConvergence(WsnSenseError, ArithmeticError):
    """An iterative routine hit its iteration cap."""


class NonFinite(WsnSenseError, ArithmeticError):
    """An objective returned NaN inside the search bracket."""


class DegenerateSpectrum(WsnSenseError, ValueError):
    """Clustered eigenvalues could not be separated for the partial-fraction density."""


class DegenerateProposal(WsnSenseError, ValueError):
    """The importance-sampling proposal is undefined for the requested window length."""


class InvalidParam(WsnSenseError, ValueError):
    """A parameter lies outside the domain a routine supports."""


class ConfigError(WsnSenseError, ValueError):
    """A scenario or experiment configuration is malformed."""


class InsufficientRuns(UserWarning):
    """Too few Monte Carlo runs for a reliable tail quantile."""
