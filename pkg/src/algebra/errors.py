"""
Exception hierarchy for the interacting-free noise toolkit.

Every error raised on purpose by the library derives from IFockError, so the
command line layer can map failures onto exit codes with a single except
clause per category.
"""

from typing import Optional, Sequence


class IFockError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(IFockError, ValueError):
    """Vectors or operators of incompatible dimension were combined."""


class TrivialSequenceError(IFockError, ValueError):
    """An operation that needs a non-trivial epsilon sequence got a trivial one."""


class PairingLimitError(IFockError, ValueError):
    """Exhaustive pairing enumeration was requested beyond the supported length."""


class CrossingPairingError(IFockError, ValueError):
    """A nesting query was made on a pairing whose pairs cross."""


class TruncationError(IFockError):
    """A truncated free Fock space computation would lose norm at the top level."""


class CapacityError(IFockError):
    """An interacting Fock vector would exceed its configured number of levels."""


class UnsupportedModel(IFockError, ValueError):
    """The dispersion / dimension combination is outside what an operation supports."""


class ConfigError(IFockError, ValueError):
    """A run configuration failed validation."""


class DegenerateShell(IFockError, ArithmeticError):
    """
    The energy shell is tangent at some root, so the Golden-rule density
    |dDelta/dk|^-1 diverges.

    Attributes:
        l: Particle momentum at which the shell was solved
        p: Probe momentum of the correlator being evaluated, when known
        k: Offending root
        jacobian: |dDelta/dk| at the root
    """

    def __init__(self, message: str, l: Optional[Sequence[float]] = None,
                 k: Optional[float] = None, jacobian: Optional[float] = None):
        super().__init__(message)
        self.l = l
        self.k = k
        self.jacobian = jacobian
        self.p: Optional[float] = None


class QuadratureError(IFockError, ArithmeticError):
    """
    Adaptive quadrature did not reach its tolerance.

    Attributes:
        routine: Name of the integration routine that failed
        estimate: Last integral estimate
        error: Reported absolute error estimate
    """

    def __init__(self, message: str, routine: str = "", estimate: complex = 0.0,
                 error: float = float("nan")):
        super().__init__(message)
        self.routine = routine
        self.estimate = estimate
        self.error = error
