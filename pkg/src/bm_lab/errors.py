"""Exception types raised across the package."""

from __future__ import annotations


class BMLabError(Exception):
    """Base class for all package errors."""


class ResolutionError(BMLabError, ValueError):
    """Requested band limit exceeds what the grid integrates exactly."""


class NotConvexError(BMLabError):
    """A support function failed the positive-definiteness test on Q(h)."""

    def __init__(self, message: str, node: int, eigenvalue: float):
        super().__init__(message)
        self.node = node
        self.eigenvalue = eigenvalue


class OriginOutsideError(BMLabError):
    """Support function is not strictly positive (origin not interior)."""


class ResonanceError(BMLabError):
    """Helmholtz extension hit the resonant radial mode."""


class IllConditionedModeError(BMLabError):
    """Radial factor is too small at r=1 to normalize."""


class ParityError(BMLabError, ValueError):
    """Input violates an evenness requirement."""


class DegenerateInputError(BMLabError, ValueError):
    """Input is excluded by the hypotheses of a verifier (e.g. constant data)."""


class SolverError(BMLabError):
    """Linear or eigen solve failed or was inaccurate."""


class UsageError(BMLabError, ValueError):
    """Bad configuration; carries the offending field name."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
