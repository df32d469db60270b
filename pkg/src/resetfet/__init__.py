"""First-exit problems for drifted Brownian motion with Poissonian resetting on an interval."""

from .core import ResettingParams, SpectralHelpers, spectral_helpers, translate_to_origin, validate
from .errors import (
    DegenerateConditioning,
    DomainError,
    GridTooCoarse,
    HorizonExceeded,
    NumericalError,
    ResetFETError,
    SingularSystem,
    SingularityUnresolved,
    UnstableInversion,
    VerificationFailed,
)

__all__ = [
    "ResettingParams",
    "SpectralHelpers",
    "spectral_helpers",
    "translate_to_origin",
    "validate",
    "ResetFETError",
    "DomainError",
    "NumericalError",
    "DegenerateConditioning",
    "SingularSystem",
    "GridTooCoarse",
    "UnstableInversion",
    "SingularityUnresolved",
    "HorizonExceeded",
    "VerificationFailed",
]

__version__ = "0.1.0"
