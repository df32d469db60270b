"""Exception hierarchy shared by every module of the package."""


class ResetFETError(Exception):
    """Base class for all package errors."""


class DomainError(ResetFETError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class NumericalError(ResetFETError, ArithmeticError):
    """A numerical procedure failed to reach its requested accuracy."""


class DegenerateConditioning(NumericalError):
    """Conditioning on an event whose probability is (numerically) zero."""


class SingularSystem(NumericalError):
    """The discretised boundary-value system is singular."""


class GridTooCoarse(NumericalError):
    """Grid refinement changed the solution by more than the tolerance."""


class UnstableInversion(NumericalError):
    """A numerical Laplace inversion is sensitive to its order parameter."""


class SingularityUnresolved(NumericalError):
    """Two-sided extrapolation across a removable singularity disagreed."""


class HorizonExceeded(ResetFETError, RuntimeError):
    """A simulated path did not exit before the safety horizon."""

    def __init__(self, message, count=1):
        super().__init__(message)
        self.count = count


class VerificationFailed(ResetFETError, AssertionError):
    """A printed closed form disagrees with the computed forward map."""

    def __init__(self, message, lam=None, error=None):
        super().__init__(message)
        self.lam = lam
        self.error = error
