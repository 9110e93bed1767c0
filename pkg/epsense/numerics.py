"""
numerics.py

Dense complex linear algebra for the small matrices this package works with
(N <= 16): inversion with a singularity check, eigen-decomposition with
paired left/right eigenvectors, spectral norms, and a seeded power
iteration for dominant singular vectors.

Matrices and vectors are plain numpy complex128 arrays. Nothing here mutates
its inputs.
"""

from __future__ import annotations

import os
import warnings
from typing import NamedTuple, Optional, Tuple

import numpy as np
import scipy.linalg as la
from numpy.typing import ArrayLike, NDArray

from epsense.errors import NoConvergenceError, SingularMatrixError
from epsense.logger import logger

CMat = NDArray[np.complex128]
CVec = NDArray[np.complex128]

MAX_DIMENSION = 16
SINGULAR_PIVOT_RTOL = 1e-14
POWER_ITERATION_TOL = 1e-13
POWER_ITERATION_MAX_ITER = 10_000
# Decay rates closer than this (relative to the spectral radius) count as equal
MODE_ORDER_RTOL = 1e-10


class EigenSystem(NamedTuple):
    eigenvalues: CVec
    right_vectors: CMat
    left_vectors: CMat


def as_cmat(a: ArrayLike) -> CMat:
    """Return `a` as a 2-D complex128 array (scalars become 1x1)."""
    mat = np.array(a, dtype=np.complex128)
    if mat.ndim == 0:
        mat = mat.reshape(1, 1)
    elif mat.ndim == 1:
        mat = mat.reshape(-1, 1)
    if mat.ndim != 2:
        raise ValueError(f"Expected a matrix, got an array with shape {mat.shape}")
    return mat


def as_cvec(v: ArrayLike) -> CVec:
    vec = np.array(v, dtype=np.complex128).reshape(-1)
    if vec.size < 1:
        raise ValueError("A vector needs at least one entry")
    return vec


def adjoint(a: CMat) -> CMat:
    return np.conj(a).T


def identity(n: int) -> CMat:
    return np.eye(n, dtype=np.complex128)


def _require_square(a: CMat, name: str = "matrix") -> None:
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")


def is_hermitian(a: CMat, rtol: float = 1e-12) -> bool:
    scale = max(float(np.max(np.abs(a), initial=0.0)), 1e-300)
    return bool(np.max(np.abs(a - adjoint(a)), initial=0.0) <= rtol * scale)


def inverse(a: ArrayLike) -> CMat:
    """Invert a square matrix by LU factorization with partial pivoting.

    Raises SingularMatrixError when a pivot drops below 1e-14 times the
    largest entry of `a`.
    """
    mat = as_cmat(a)
    _require_square(mat)
    scale = float(np.max(np.abs(mat), initial=0.0))
    if scale == 0.0:
        raise SingularMatrixError("Cannot invert the zero matrix")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", la.LinAlgWarning)
        lu, piv = la.lu_factor(mat, check_finite=True)

    smallest_pivot = float(np.min(np.abs(np.diag(lu))))
    if smallest_pivot < SINGULAR_PIVOT_RTOL * scale:
        raise SingularMatrixError(
            f"Matrix is singular: pivot {smallest_pivot:.3e} below "
            f"{SINGULAR_PIVOT_RTOL:.0e} x max|entry| ({scale:.3e})"
        )
    return la.lu_solve((lu, piv), identity(mat.shape[0]))


def mode_order(w: CVec) -> np.ndarray:
    """Permutation sorting eigenvalues longest-lived first, then by real part."""
    values = np.asarray(w, dtype=np.complex128)
    if values.size == 0:
        return np.arange(0)
    tol = MODE_ORDER_RTOL * max(1.0, float(np.max(np.abs(values))))
    by_decay = np.argsort(-values.imag, kind="stable")
    gaps = np.diff(-values.imag[by_decay]) > tol
    tiers = np.concatenate(([0], np.cumsum(gaps)))
    return by_decay[np.lexsort((values.real[by_decay], tiers))]


def eig(a: ArrayLike) -> EigenSystem:
    """Eigenvalues with unit-norm right and left eigenvectors.

    Column l of `right_vectors` satisfies A R = w R and column l of
    `left_vectors` satisfies L^H A = w L^H. Eigenvalues are ordered from the
    longest-lived (largest imaginary part) to the shortest-lived. Decay rates
    equal up to MODE_ORDER_RTOL form one tier ordered by real part, so
    rounding noise in the imaginary parts cannot swap branches.
    For defective matrices the vectors are only approximate; use the Kato
    decomposition there.
    """
    mat = as_cmat(a)
    _require_square(mat)
    if mat.shape[0] > MAX_DIMENSION:
        raise ValueError(
            f"Dimension {mat.shape[0]} exceeds supported maximum {MAX_DIMENSION}"
        )
    try:
        w, vl, vr = la.eig(mat, left=True, right=True)
    except la.LinAlgError as e:
        raise NoConvergenceError(f"Eigenvalue iteration did not converge: {e}") from e

    order = mode_order(w)
    w = w[order]
    vl = vl[:, order]
    vr = vr[:, order]
    vl = vl / np.linalg.norm(vl, axis=0)
    vr = vr / np.linalg.norm(vr, axis=0)
    return EigenSystem(
        eigenvalues=w.astype(np.complex128),
        right_vectors=vr.astype(np.complex128),
        left_vectors=vl.astype(np.complex128),
    )


def eigenvalues(a: ArrayLike) -> CVec:
    mat = as_cmat(a)
    _require_square(mat)
    try:
        w = la.eigvals(mat)
    except la.LinAlgError as e:
        raise NoConvergenceError(f"Eigenvalue iteration did not converge: {e}") from e
    return w[mode_order(w)].astype(np.complex128)


def spectral_norm(a: ArrayLike) -> float:
    """Largest singular value, i.e. max over unit vectors psi of ||A psi||."""
    mat = as_cmat(a)
    if mat.size == 0 or not np.any(mat):
        return 0.0
    return float(la.svdvals(mat)[0])


def matrix_power(a: CMat, k: int) -> CMat:
    _require_square(a)
    return np.linalg.matrix_power(a, k)


def get_seed() -> int:
    """Random-restart seed from EPSENSE_SEED (default 0)."""
    raw = os.getenv("EPSENSE_SEED", "0")
    try:
        return int(raw)
    except ValueError as e:
        raise ValueError(f"EPSENSE_SEED must be an integer, got {raw!r}") from e


def fix_phase(v: CVec) -> CVec:
    """Rotate `v` so that its largest-magnitude entry is real and positive."""
    k = int(np.argmax(np.abs(v)))
    if abs(v[k]) == 0.0:
        return v
    return v * (abs(v[k]) / v[k])


def _power_run(
    gram: CMat, start: CVec, tol: float, max_iter: int
) -> Tuple[float, CVec, bool]:
    x = start / np.linalg.norm(start)
    rayleigh_old = np.inf
    for iteration in range(max_iter):
        y = gram @ x
        norm_y = np.linalg.norm(y)
        if norm_y == 0.0:
            return 0.0, x, True
        x = y / norm_y
        rayleigh = float(np.real(np.vdot(x, gram @ x)))
        if abs(rayleigh - rayleigh_old) <= tol * abs(rayleigh):
            logger.debug(f"Power iteration converged after {iteration + 1} steps")
            return rayleigh, x, True
        rayleigh_old = rayleigh
    return float(np.real(np.vdot(x, gram @ x))), x, False


def dominant_singular_vector(
    a: ArrayLike,
    seed: Optional[int] = None,
    tol: float = POWER_ITERATION_TOL,
    max_iter: int = POWER_ITERATION_MAX_ITER,
) -> Tuple[float, CVec]:
    """Dominant right singular vector of `a` by power iteration on A^H A.

    Runs once from the normalized all-ones vector and once from a seeded
    random vector (escaping starts orthogonal to the dominant direction),
    keeping whichever reaches the larger Rayleigh quotient. Returns
    (sigma_max, v) with v phase-fixed by `fix_phase`. The matrix is divided
    by its largest entry first so tiny or huge entries cannot under- or
    overflow the Gram matrix.
    """
    mat = as_cmat(a)
    n = mat.shape[1]
    magnitude = float(np.max(np.abs(mat))) if mat.size else 0.0
    if magnitude == 0.0:
        return 0.0, np.ones(n, dtype=np.complex128) / np.sqrt(max(n, 1))
    scaled = mat / magnitude
    gram = adjoint(scaled) @ scaled
    rng = np.random.default_rng(get_seed() if seed is None else seed)

    starts = [
        np.ones(n, dtype=np.complex128),
        rng.standard_normal(n) + 1j * rng.standard_normal(n),
    ]
    best: Optional[Tuple[float, CVec]] = None
    converged_any = False
    for start in starts:
        rayleigh, vec, converged = _power_run(gram, start, tol, max_iter)
        converged_any = converged_any or converged
        if best is None or rayleigh > best[0]:
            best = (rayleigh, vec)

    assert best is not None
    if not converged_any:
        logger.warn(
            f"Power iteration did not converge within {max_iter} steps; "
            "using the best iterate"
        )
    return magnitude * float(np.sqrt(max(best[0], 0.0))), fix_phase(best[1])

