"""
spectral.py

Resolvent machinery for effective Hamiltonians: Green's functions, the Kato
decomposition into eigenprojectors and nilpotents, the local density of
states, spectral response strengths, Petermann factors and the QFI bounds
they imply for isolated modes, diabolic points and exceptional points.
"""

from __future__ import annotations

import math
from typing import List, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from epsense.errors import (
    AtPoleError,
    IllConditionedError,
    NearDefectiveError,
    SingularMatrixError,
)
from epsense.logger import logger
from epsense.model import effective_hamiltonian
from epsense.numerics import (
    CMat,
    MAX_DIMENSION,
    as_cmat,
    eig,
    eigenvalues,
    identity,
    inverse,
    matrix_power,
    spectral_norm,
)
from epsense.sensing_types import (
    KatoCluster,
    KatoDecomposition,
    LdosSample,
    PassiveBound,
    Perturbation,
    ScatteringModel,
)

MACHINE_EPS = float(np.finfo(np.float64).eps)
BASE_CLUSTER_TOL = 1e-8
NILPOTENT_RTOL = 1e-8
NEAR_DEFECTIVE_OVERLAP = 1e-8
PETERMANN_CHECK_OVERLAP = 1e-4
PETERMANN_CHECK_RTOL = 1e-6


def greens_function(h: CMat, omega: float) -> CMat:
    """G(omega) = (omega I - H)^-1."""
    mat = as_cmat(h)
    try:
        return inverse(omega * identity(mat.shape[0]) - mat)
    except SingularMatrixError as e:
        raise AtPoleError(f"omega = {omega} sits on a pole of the resolvent") from e


# --- Kato decomposition ---


def _cluster_threshold(size: int, scale: float) -> float:
    # A defective block of order k splits numerically by about eps^(1/k)
    return scale * max(BASE_CLUSTER_TOL, 10.0 * MACHINE_EPS ** (1.0 / size))


def _components(
    values: np.ndarray, candidates: Sequence[int], threshold: float
) -> List[List[int]]:
    idx = np.asarray(candidates, dtype=int)
    distances = np.abs(values[idx, None] - values[None, idx])
    n_components, labels = connected_components(
        csr_matrix(distances <= threshold), directed=False
    )
    return [sorted(idx[labels == label].tolist()) for label in range(n_components)]


def _group_eigenvalues(
    values: np.ndarray, scale: float, cluster_tol: Optional[float]
) -> List[List[int]]:
    n = len(values)
    if cluster_tol is not None:
        return _components(values, range(n), cluster_tol * scale)

    remaining = list(range(n))
    groups: List[List[int]] = []
    for size in range(n, 1, -1):
        if len(remaining) < size:
            continue
        for members in _components(values, remaining, _cluster_threshold(size, scale)):
            if len(members) >= size:
                groups.append(members)
                remaining = [i for i in remaining if i not in members]
    groups.extend([i] for i in remaining)
    return groups


def _check_gaps(values: np.ndarray, groups: List[List[int]], min_gap: float) -> None:
    label = np.empty(len(values), dtype=int)
    for g, members in enumerate(groups):
        label[members] = g
    for a in range(len(values)):
        for b in range(a + 1, len(values)):
            if label[a] == label[b]:
                continue
            gap = abs(values[a] - values[b])
            if gap < min_gap:
                raise IllConditionedError(
                    f"Eigenvalues {values[a]:.6g} and {values[b]:.6g} are {gap:.3e} "
                    f"apart, below the separation threshold {min_gap:.3e}"
                )


def _projector(h: CMat, mean: complex, order: int, others: np.ndarray) -> CMat:
    """Spectral projector of the cluster at `mean` with `order` eigenvalues.

    P = A(H) q(H - mean) with A(x) = prod_k (x - w_k) over the eigenvalues of
    the other clusters and q the Taylor polynomial of 1/A around `mean`,
    truncated at degree order - 1.
    """
    n = h.shape[0]
    eye = identity(n)
    if others.size == 0:
        return eye

    annihilator = eye.copy()
    series = np.zeros(order, dtype=np.complex128)
    series[0] = 1.0
    powers = np.arange(order)
    for w_k in others:
        annihilator = annihilator @ (h - w_k * eye)
        d = mean - w_k
        # 1 / (d + t) = sum_j (-1)^j t^j / d^(j+1)
        factor = (-1.0) ** powers / d ** (powers + 1)
        series = np.convolve(series, factor)[:order]

    shifted = h - mean * eye
    taylor = np.zeros_like(h)
    shifted_power = eye
    for coeff in series:
        taylor = taylor + coeff * shifted_power
        shifted_power = shifted_power @ shifted
    return annihilator @ taylor


def _nilpotency_index(nilpotent: CMat, order: int, scale: float) -> int:
    ep_order = 1
    power = nilpotent
    for k in range(1, order):
        if spectral_norm(power) > NILPOTENT_RTOL * scale**k:
            ep_order = k + 1
        power = power @ nilpotent
    return ep_order


def kato_decompose(h: CMat, cluster_tol: Optional[float] = None) -> KatoDecomposition:
    """Split H into sum_l (omega_l P_l + N_l).

    With `cluster_tol` left at None eigenvalues are grouped size-aware: k of
    them merge when they are connected under
    max(1e-8, 10 eps^(1/k)) * max(1, ||H||). An explicit `cluster_tol`
    groups at the fixed distance cluster_tol * max(1, ||H||).

    Raises IllConditionedError when two clusters come closer than ten times
    the pair threshold.
    """
    mat = as_cmat(h)
    n = mat.shape[0]
    if mat.shape != (n, n):
        raise ValueError(f"Hamiltonian must be square, got shape {mat.shape}")
    if n > MAX_DIMENSION:
        raise ValueError(f"Dimension {n} exceeds supported maximum {MAX_DIMENSION}")

    values = eigenvalues(mat)
    scale = max(1.0, spectral_norm(mat))
    groups = _group_eigenvalues(values, scale, cluster_tol)
    groups.sort(key=min)

    pair_threshold = (
        cluster_tol * scale if cluster_tol is not None else _cluster_threshold(2, scale)
    )
    _check_gaps(values, groups, 10.0 * pair_threshold)

    clusters: List[KatoCluster] = []
    for members in groups:
        member_values = values[members]
        mean = complex(np.mean(member_values))
        others = np.delete(values, members)
        projector = _projector(mat, mean, len(members), others)
        nilpotent = (mat - mean * identity(n)) @ projector
        ep_order = _nilpotency_index(nilpotent, len(members), scale)
        logger.debug(
            f"Cluster at {mean:.6g}: multiplicity {len(members)}, EP order {ep_order}"
        )
        clusters.append(
            KatoCluster(
                omega=mean,
                order=len(members),
                ep_order=ep_order,
                projector=projector,
                nilpotent=nilpotent,
                members=tuple(complex(v) for v in member_values),
            )
        )
    return KatoDecomposition(hamiltonian=mat, clusters=clusters)


def kato_resolvent(k: KatoDecomposition, omega: float) -> CMat:
    """Partial-fraction resolvent sum_l [P_l/(w - w_l) + sum_j N_l^j/(w - w_l)^(j+1)]."""
    n = k.hamiltonian.shape[0]
    total = np.zeros((n, n), dtype=np.complex128)
    for cluster in k.clusters:
        delta = omega - cluster.omega
        if delta == 0:
            raise AtPoleError(f"omega = {omega} coincides with eigenvalue {cluster.omega}")
        total = total + cluster.projector / delta
        power = cluster.nilpotent
        for j in range(1, cluster.order):
            total = total + power / delta ** (j + 1)
            power = power @ cluster.nilpotent
    return total


def _cluster(k: KatoDecomposition, index: int) -> KatoCluster:
    if not 0 <= index < len(k.clusters):
        raise ValueError(f"Cluster index {index} outside 0..{len(k.clusters) - 1}")
    return k.clusters[index]


def dominant_cluster(k: KatoDecomposition, omega: float) -> int:
    """Index of the cluster nearest to the real frequency `omega`."""
    distances = [abs(omega - c.omega) for c in k.clusters]
    return int(np.argmin(distances))


def spectral_response_strength(k: KatoDecomposition, cluster: int) -> float:
    """xi = ||N^(n-1)|| at an EP of order n; ||P|| (= sqrt of K) otherwise."""
    c = _cluster(k, cluster)
    if c.is_exceptional:
        return spectral_norm(matrix_power(c.nilpotent, c.ep_order - 1))
    return spectral_norm(c.projector)


def _decompose_or_none(h: CMat) -> Optional[KatoDecomposition]:
    try:
        return kato_decompose(h)
    except IllConditionedError:
        return None


def _cluster_of(decomposition: KatoDecomposition, value: complex) -> KatoCluster:
    return min(decomposition.clusters, key=lambda c: abs(value - c.omega))


def _require_simple(
    decomposition: Optional[KatoDecomposition], value: complex, overlap: float, mode: int
) -> None:
    """Refuse eigenvalues that are not simple.

    The Kato clusters decide first: LAPACK leaves |<L|R>| of order 1e-8 at an
    exact EP, so the overlap threshold alone lets such modes through. The
    overlap test covers spectra whose clusters cannot be separated.
    """
    if decomposition is not None:
        cluster = _cluster_of(decomposition, value)
        if cluster.order > 1:
            kind = "an EP" if cluster.is_exceptional else "a degenerate eigenvalue"
            raise NearDefectiveError(
                f"Mode {mode} at {value:.6g} belongs to {kind} of order {cluster.order}; "
                "use the spectral response strength instead"
            )
    if overlap < NEAR_DEFECTIVE_OVERLAP:
        raise NearDefectiveError(
            f"|<L|R>| = {overlap:.3e} for mode {mode}; the eigenvalue is at or "
            "near an EP, use the spectral response strength instead"
        )


def petermann_factor(h: CMat, mode: int) -> float:
    """K = 1 / |<L|R>|^2 with unit-norm left and right eigenvectors.

    Modes are indexed as returned by numerics.eig (longest-lived first).
    Raises NearDefectiveError unless the eigenvalue is simple.
    """
    mat = as_cmat(h)
    system = eig(mat)
    if not 0 <= mode < len(system.eigenvalues):
        raise ValueError(f"Mode index {mode} outside 0..{len(system.eigenvalues) - 1}")

    value = system.eigenvalues[mode]
    overlap = abs(np.vdot(system.left_vectors[:, mode], system.right_vectors[:, mode]))
    decomposition = _decompose_or_none(mat)
    _require_simple(decomposition, value, overlap, mode)
    k_factor = 1.0 / overlap**2

    if decomposition is not None and overlap > PETERMANN_CHECK_OVERLAP:
        _cross_check_petermann(_cluster_of(decomposition, value), value, k_factor)
    return k_factor


def _cross_check_petermann(cluster: KatoCluster, value: complex, k_factor: float) -> None:
    via_projector = spectral_norm(cluster.projector) ** 2
    if abs(via_projector - k_factor) > PETERMANN_CHECK_RTOL * k_factor:
        logger.warn(
            f"Petermann factor mismatch at {value:.6g}: eigenvectors give "
            f"{k_factor:.12g}, projector norm gives {via_projector:.12g}"
        )


def ldos(
    m: ScatteringModel, site: int, omega: float, modal: bool = False
) -> LdosSample:
    """Local density of states -Im G_jj / pi at a cavity site.

    With `modal=True` the per-mode terms of the eigenvector expansion are
    attached; their imaginary parts sum to rho. Near an EP the individual
    terms grow without bound while the sum stays finite; at the EP itself
    (or any non-simple eigenvalue) NearDefectiveError is raised.
    """
    if not 0 <= site < m.n_modes:
        raise ValueError(f"Site {site} outside 0..{m.n_modes - 1}")
    h = effective_hamiltonian(m)
    g = greens_function(h, omega)
    rho = float(-g[site, site].imag / math.pi)

    modal_terms = None
    if modal:
        system = eig(h)
        decomposition = _decompose_or_none(h)
        modal_terms = []
        for l, value in enumerate(system.eigenvalues):
            right = system.right_vectors[:, l]
            left = system.left_vectors[:, l]
            overlap = np.vdot(left, right)
            _require_simple(decomposition, value, abs(overlap), l)
            g_l = right[site] * np.conj(left[site]) / (overlap * (omega - value))
            modal_terms.append(complex(-g_l / math.pi))
    return LdosSample(site=site, omega=omega, rho=rho, modal_terms=modal_terms)


# --- Bounds ---


def _distance(cluster: KatoCluster, omega: float) -> float:
    distance = abs(omega - cluster.omega)
    if distance == 0.0:
        raise AtPoleError(f"omega = {omega} coincides with eigenvalue {cluster.omega}")
    return distance


def qfi_bound_localized(k: KatoDecomposition, cluster: int, omega: float) -> float:
    """Upper bound on the maximum QFI of a localized perturbation.

    16 K / |w - w_l|^2 for a non-defective cluster, 16 xi^2 / |w - w_l|^(2n)
    at an EP of order n.
    """
    c = _cluster(k, cluster)
    distance = _distance(c, omega)
    xi = spectral_response_strength(k, cluster)
    if not c.is_exceptional:
        return 16.0 * xi**2 / distance**2
    return 16.0 * xi**2 / distance ** (2 * c.ep_order)


def qfi_bound_general(
    m: ScatteringModel,
    pert: Perturbation,
    k: KatoDecomposition,
    cluster: int,
    omega: float,
) -> float:
    c = _cluster(k, cluster)
    distance = _distance(c, omega)
    prefactor = 16.0 * spectral_norm(pert.h1) ** 2 * spectral_norm(m.w) ** 4
    xi = spectral_response_strength(k, cluster)
    if not c.is_exceptional:
        return prefactor * xi**4 / distance**4
    return prefactor * xi**4 / distance ** (4 * c.ep_order)


def enhancement_factor(xi: float, decay: float, n: int) -> float:
    """EF = xi^2 / decay^(2(n-1)): EP bound over the isolated-mode bound."""
    if decay <= 0:
        raise ValueError(f"Decay rate must be positive, got {decay}")
    if n < 2:
        raise ValueError(f"EP order must be at least 2, got {n}")
    return xi**2 / decay ** (2 * (n - 1))


def passive_xi_bound(decay: float, n: int) -> PassiveBound:
    """Largest spectral response strength a passive EP of order n can reach.

    Holds for systems whose dimension equals the EP order. For n = 3 the
    tighter numerically determined value 4 decay^2 is reported as well.
    """
    if decay < 0:
        raise ValueError(f"Decay rate must be non-negative, got {decay}")
    if n < 2:
        raise ValueError(f"EP order must be at least 2, got {n}")
    xi_max = (math.sqrt(2 * n) * decay) ** (n - 1)
    ef_cap = float((2 * n) ** (n - 1))
    if n == 3:
        return PassiveBound(
            xi_max=xi_max, xi_max_strict=4.0 * decay**2, ef_cap=ef_cap, ef_cap_strict=16.0
        )
    return PassiveBound(
        xi_max=xi_max, xi_max_strict=xi_max, ef_cap=ef_cap, ef_cap_strict=ef_cap
    )
