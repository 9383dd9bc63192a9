"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the range where a model is defined."""


class SaturationError(DomainError):
    """Observed count rate at or above the dead-time pole."""


class CalibrationError(RuntimeError):
    """Model response vanishes where a calibration anchor was requested."""


class NumericalError(RuntimeError):
    """Quadrature or solver did not reach the requested accuracy."""


class FitInitError(ValueError):
    """Data do not allow a starting point for a fit (flat or monotone)."""


class ConfigError(ValueError):
    """Invalid configuration document."""
