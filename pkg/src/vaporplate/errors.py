"""Exception types shared across the package."""


class VaporplateError(Exception):
    """Base class for all package errors."""


class ModelError(VaporplateError):
    """Invalid level scheme, transition table, or decay network."""


class ConfigError(VaporplateError):
    """Malformed or inconsistent scenario configuration."""


class SolverError(VaporplateError):
    """Steady-state or time-evolution solve failed."""


class InversionError(VaporplateError):
    """LCR scan inversion is ill-conditioned or inconsistent."""
