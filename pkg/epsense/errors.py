"""
errors.py

Exception hierarchy. Every failure the numerics can signal has its own type
so callers (and the CLI exit-code mapping) can tell a frequency sitting on a
pole apart from an ill-posed clustering or a bad input.
"""


class EpsenseError(Exception):
    """Base class for all errors raised by epsense."""


class SingularMatrixError(EpsenseError):
    """A pivot fell below the singularity threshold during inversion."""


class AtPoleError(SingularMatrixError):
    """The evaluation frequency coincides with a real eigenvalue."""


class NoConvergenceError(EpsenseError):
    """An iterative eigen-solver hit its iteration cap."""


class IllConditionedError(EpsenseError):
    """Eigenvalue clusters are too close to be separated unambiguously."""


class NearDefectiveError(EpsenseError):
    """Left and right eigenvectors are (numerically) self-orthogonal."""


class NotLocalizedError(EpsenseError):
    """The operation needs a perturbation of the form |j><j|."""


class MultiChannelError(EpsenseError):
    """The operation is only defined for a single scattering channel."""


class GridRefinementError(EpsenseError):
    """A sampled curve changes too fast between neighbouring grid points."""
