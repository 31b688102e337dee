"""Exception hierarchy.

Everything raised on purpose by the toolkit derives from :class:`KerrwellError`
so callers (and the CLI) can separate physics/numerics failures from usage
mistakes.
"""

from __future__ import annotations


class KerrwellError(Exception):
    """Base class for all toolkit errors."""


class UsageError(KerrwellError, ValueError):
    """Bad arguments, bad configuration or an unknown name."""


class InvalidDimensionError(UsageError):
    """Fock truncation too small for the requested object."""


class ConfigError(UsageError):
    """Malformed or unknown keys in a sweep configuration document."""


class NumericalError(KerrwellError, ArithmeticError):
    """A numerical procedure failed a self-check."""


class ConsistencyError(NumericalError):
    """An internal invariant (Hermiticity, trace preservation, ...) was violated."""


class IntegrationError(NumericalError):
    """Time propagation drifted out of tolerance."""


class DegenerateSteadyStateError(NumericalError):
    """The Liouvillian null space is not one dimensional."""


class IndeterminateError(NumericalError):
    """A spectral gap is below numerical resolution."""


class NoDecayError(NumericalError):
    """A population trajectory does not decay enough to be fitted."""


class InsufficientSupportError(NumericalError):
    """Too few populated levels to form detailed-balance pairs."""


class BistabilityLostError(NumericalError):
    """The classical landscape has a single minimum.

    ``boundary`` holds the linear-drive amplitude at which bistability is lost
    for the remaining parameters, when it could be located.
    """

    def __init__(self, message: str, boundary: float | None = None):
        super().__init__(message)
        self.boundary = boundary
