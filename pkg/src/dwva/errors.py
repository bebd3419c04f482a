"""Exception hierarchy.

The CLI maps each family onto an exit code, so every error raised by the
library derives from either ``ConfigError`` or ``PhysicsError``.
"""


class DwvaError(Exception):
    """Base class for all package errors."""


class ConfigError(DwvaError, ValueError):
    """Invalid or incomplete configuration. ``field`` names the offending key path."""

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class PhysicsError(DwvaError, ValueError):
    """A physical precondition of the model does not hold."""


class ZeroOverlap(PhysicsError):
    """Pre- and post-selection states are orthogonal; the weak value is undefined."""


class FirstOrderRegimeError(PhysicsError):
    """Deflection too large for the first-order mode expansion."""


class DegeneratePostselection(PhysicsError):
    """Post-selection probability outside the open interval (0, 1)."""


class NonPositiveLO(PhysicsError):
    """Local oscillator carries no photons."""


class AliasingError(PhysicsError):
    """Modulation frequency at or above the Nyquist frequency."""


class InsufficientData(PhysicsError):
    """Trace too short for the requested resolution bandwidth."""


class OutOfBand(PhysicsError):
    """Requested frequency lies outside the spectrum's frequency grid."""
