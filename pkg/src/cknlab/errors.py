"""Exception and warning types raised by :mod:`cknlab`."""


class CknError(Exception):
    """Base class for all package errors."""


class DomainError(CknError, ValueError):
    """Parameters or arguments outside the admissible range."""


class ResonanceError(CknError):
    """Frobenius recurrence hits an integer exponent gap that needs a log term."""


class StepFailure(CknError):
    """The ODE integrator could not advance."""


class DegeneratePair(CknError):
    """Wronskian of a solution pair vanishes or drifts."""


class NormalizationError(CknError):
    """Matching against the origin basis is ill conditioned."""


class DivergentMass(CknError):
    """The mass integral diverges (needs n < 4)."""


class BvpFailure(CknError):
    """A boundary value solve failed."""


class EigenFailure(CknError):
    """The generalized eigensolver did not converge."""


class TruncationWarning(UserWarning):
    """A mode sum was truncated before its terms became negligible."""
