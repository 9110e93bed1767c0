"""Quantum Fisher information limits of non-Hermitian scattering sensors."""

from epsense.errors import (
    AtPoleError,
    EpsenseError,
    GridRefinementError,
    IllConditionedError,
    MultiChannelError,
    NearDefectiveError,
    NoConvergenceError,
    NotLocalizedError,
    SingularMatrixError,
)
from epsense.model import build_model, effective_hamiltonian
from epsense.qfi import evaluate, qfi_max, scattering_matrix
from epsense.sensing_types import (
    MirrorRing,
    Perturbation,
    ScatteringModel,
    SingleRing,
    ThreeRing,
    TwoRing,
)
from epsense.spectral import kato_decompose

__all__ = [
    "AtPoleError",
    "EpsenseError",
    "GridRefinementError",
    "IllConditionedError",
    "MirrorRing",
    "MultiChannelError",
    "NearDefectiveError",
    "NoConvergenceError",
    "NotLocalizedError",
    "Perturbation",
    "ScatteringModel",
    "SingleRing",
    "SingularMatrixError",
    "ThreeRing",
    "TwoRing",
    "build_model",
    "effective_hamiltonian",
    "evaluate",
    "kato_decompose",
    "qfi_max",
    "scattering_matrix",
]
