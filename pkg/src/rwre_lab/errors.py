"""Exception types shared across the library."""


class RwreError(Exception):
    """Base class for all library errors."""


class EllipticityError(RwreError):
    """An environment value or atom falls outside [kappa, 1 - kappa]."""


class NonBallisticError(RwreError):
    """The single-site law has mean offspring ratio >= 1 (no positive speed)."""


class CoverageError(RwreError):
    """An operation needs environment sites outside the realized window."""


class TruncationError(RwreError):
    """A left-tail accumulation failed to certify convergence within its depth budget."""


class BracketError(RwreError):
    """A one-dimensional optimizer ended on the edge of its search bracket."""


class ContextError(RwreError):
    """Burn-in context too short: the two-seed sensitivity check did not converge."""


class ConfigError(RwreError):
    """An experiment configuration file failed validation."""
