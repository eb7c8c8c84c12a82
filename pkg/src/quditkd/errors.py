"""Exception types raised across the package."""


class QuditKDError(Exception):
    """Base class for all package errors."""


class NotPrimeError(QuditKDError, ValueError):
    pass


class SizeLimitError(QuditKDError):
    """A dense-matrix check would exceed the supported Hilbert-space size."""


class NormalizationError(QuditKDError, ValueError):
    pass


class NegativeRateError(QuditKDError, ValueError):
    pass


class SymmetryViolation(QuditKDError, ValueError):
    """The two-basis symmetry p[m,n] = p[n,-m] does not hold.

    Attributes
    ----------
    orbit : tuple of (m, n)
        The orbit with the largest spread between its members.
    deviation : float
        ``max - min`` of the rates on that orbit.
    """

    def __init__(self, orbit, deviation):
        self.orbit = tuple(orbit)
        self.deviation = float(deviation)
        super().__init__(
            f"symmetry violated on orbit {list(self.orbit)}: spread {self.deviation:.3e}"
        )


class InfeasibleParameters(QuditKDError, ValueError):
    """Requested channel parameters do not yield valid probabilities."""


class DegenerateDistribution(QuditKDError, ArithmeticError):
    pass


class PrecisionLoss(QuditKDError, ArithmeticError):
    """Closed-form 2**k powers lost too many significant digits."""


class ZeroRowError(QuditKDError, ZeroDivisionError):
    pass


class ZeroDenominator(QuditKDError, ZeroDivisionError):
    pass


class PreconditionViolation(QuditKDError, ValueError):
    pass


class NotDistillable(QuditKDError, ValueError):
    pass


class DomainError(QuditKDError, ValueError):
    pass


class InsufficientPairs(QuditKDError, ValueError):
    pass
