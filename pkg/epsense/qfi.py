"""
qfi.py

Scattering matrix, its derivative with respect to the sensed parameter, the
generalized Wigner-Smith operator and the quantum Fisher information (QFI)
figures of merit built on them.

All QFI values are per unit incoming photon flux (hbar * omega = 1) and are
evaluated at epsilon = 0.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence, Tuple

import numpy as np

from epsense.errors import (
    GridRefinementError,
    IllConditionedError,
    MultiChannelError,
    NotLocalizedError,
)
from epsense.logger import logger
from epsense.model import effective_hamiltonian
from epsense.numerics import (
    CMat,
    CVec,
    adjoint,
    as_cvec,
    dominant_singular_vector,
    eigenvalues,
    identity,
    spectral_norm,
)
from epsense.sensing_types import (
    PhaseResponse,
    Perturbation,
    QfiBounds,
    QfiEvaluation,
    ScatteringModel,
)
from epsense.spectral import (
    dominant_cluster,
    greens_function,
    kato_decompose,
    ldos,
    qfi_bound_general,
    qfi_bound_localized,
)

CONSISTENCY_RTOL = 1e-10
UNITARITY_TOL = 1e-10
PHASE_STEP_LIMIT = math.pi / 2
PHASE_STEP_FRACTION = 1e-3


def _require_compatible(m: ScatteringModel, pert: Perturbation) -> None:
    if pert.h1.shape != m.h_sys.shape:
        raise ValueError(
            f"Perturbation shape {pert.h1.shape} does not match model {m.h_sys.shape}"
        )


def _require_channel(m: ScatteringModel, channel: int) -> None:
    if not 0 <= channel < m.n_channels:
        raise ValueError(f"Channel {channel} outside 0..{m.n_channels - 1}")


def _localized_site(pert: Perturbation) -> int:
    if pert.localized_site is None:
        raise NotLocalizedError(
            f"Perturbation '{pert.label or 'h1'}' is not of the form |j><j|"
        )
    return pert.localized_site


def _s_matrix(h: CMat, w: CMat, omega: float) -> CMat:
    g = greens_function(h, omega)
    return identity(w.shape[1]) - 2j * adjoint(w) @ g @ w


def scattering_matrix(m: ScatteringModel, omega: float) -> CMat:
    """S = I - 2i W^H G(omega) W."""
    return _s_matrix(effective_hamiltonian(m), m.w, omega)


def scattering_derivative(m: ScatteringModel, pert: Perturbation, omega: float) -> CMat:
    """dS/d(epsilon) = -2i W^H G H1 G W at epsilon = 0."""
    _require_compatible(m, pert)
    g = greens_function(effective_hamiltonian(m), omega)
    return -2j * adjoint(m.w) @ g @ pert.h1 @ g @ m.w


def wigner_smith(m: ScatteringModel, pert: Perturbation, omega: float) -> CMat:
    """Q = -2 W^H G^H H1 G W; equals -i S^H dS/d(epsilon) when S is unitary."""
    _require_compatible(m, pert)
    g = greens_function(effective_hamiltonian(m), omega)
    return -2.0 * adjoint(m.w) @ adjoint(g) @ pert.h1 @ g @ m.w


def qfi_for_input(
    m: ScatteringModel, pert: Perturbation, omega: float, u_in: CVec
) -> float:
    """4 ||dS u||^2 / ||u||^2 for a coherent input with amplitudes `u_in`."""
    u = as_cvec(u_in)
    if u.shape[0] != m.n_channels:
        raise ValueError(f"Input has {u.shape[0]} entries, model has {m.n_channels} channels")
    norm_sq = float(np.real(np.vdot(u, u)))
    if norm_sq == 0.0:
        raise ValueError("Input state must be nonzero")
    ds = scattering_derivative(m, pert, omega)
    out = ds @ u
    return 4.0 * float(np.real(np.vdot(out, out))) / norm_sq


def qfi_max(
    m: ScatteringModel, pert: Perturbation, omega: float
) -> Tuple[float, CVec]:
    """Maximum QFI over all inputs and the input that reaches it.

    The value is 4 ||dS||^2 = 16 ||W^H G^H H1 G W||^2; the optimal input is
    the dominant right singular vector of dS (power iteration, phase-fixed).
    """
    ds = scattering_derivative(m, pert, omega)
    i_max = 4.0 * spectral_norm(ds) ** 2
    _, optimal_input = dominant_singular_vector(ds)
    return i_max, optimal_input


def qfi_average(m: ScatteringModel, pert: Perturbation, omega: float) -> float:
    """QFI averaged over single-channel inputs, 4 ||dS||_F^2 / M.

    For a localized perturbation dS has rank one, so this is I_max / M.
    """
    ds = scattering_derivative(m, pert, omega)
    return 4.0 * float(np.linalg.norm(ds, "fro") ** 2) / m.n_channels


def qfi_max_via_ldos(m: ScatteringModel, pert: Perturbation, omega: float) -> float:
    """16 pi^2 rho_j(omega)^2 for a perturbation localized at site j."""
    site = _localized_site(pert)
    sample = ldos(m, site, omega)
    return 16.0 * math.pi**2 * sample.rho**2


def reduced_qfi_channel(
    m: ScatteringModel,
    pert: Perturbation,
    omega: float,
    in_channel: int,
    out_channel: int,
) -> float:
    """QFI when light enters `in_channel` and only `out_channel` is observed.

    4 |dS_(out, in)|^2; valid for any perturbation.
    """
    _require_channel(m, in_channel)
    _require_channel(m, out_channel)
    ds = scattering_derivative(m, pert, omega)
    return 4.0 * abs(ds[out_channel, in_channel]) ** 2


def reduced_qfi(
    m: ScatteringModel,
    pert: Perturbation,
    omega: float,
    in_channel: Optional[int] = None,
    out_channel: Optional[int] = None,
) -> float:
    """Reduced QFI of a localized perturbation in factorized form.

    16 |<out|W^H G|j>|^2 |<j|G W|in>|^2. Channels default to the first
    observed channel.
    """
    site = _localized_site(pert)
    in_channel = m.observed_channels[0] if in_channel is None else in_channel
    out_channel = m.observed_channels[0] if out_channel is None else out_channel
    _require_channel(m, in_channel)
    _require_channel(m, out_channel)

    g = greens_function(effective_hamiltonian(m), omega)
    outgoing = (adjoint(m.w) @ g)[out_channel, site]
    incoming = (g @ m.w)[site, in_channel]
    value = 16.0 * abs(outgoing) ** 2 * abs(incoming) ** 2

    via_s = reduced_qfi_channel(m, pert, omega, in_channel, out_channel)
    if abs(value - via_s) > CONSISTENCY_RTOL * max(value, via_s, 1e-300):
        logger.warn(
            f"Reduced QFI routes disagree: factorized {value:.15g}, "
            f"S-element {via_s:.15g}"
        )
    return value


def long_lived_contribution(
    m: ScatteringModel, pert: Perturbation, omega: float
) -> float:
    """16 pi^2 rho_l^2 for the LDOS term of the longest-lived mode alone."""
    site = _localized_site(pert)
    sample = ldos(m, site, omega, modal=True)
    modal = sample.modal_ldos
    assert modal is not None
    return 16.0 * math.pi**2 * modal[0] ** 2


def decay_modified_qfi(
    m: ScatteringModel, pert: Optional[Perturbation] = None, omega: float = 0.0
) -> float:
    """I_max weighted by 16 |Im w_min|^2, the squared smallest decay rate.

    Compares sensors with different linewidths. Defined for lossless models;
    `pert` defaults to a frequency shift of the last cavity.
    """
    if m.loss_channels:
        raise ValueError("The decay-modified QFI is defined for lossless models")
    if pert is None:
        pert = Perturbation.localized(m.n_modes, m.n_modes - 1)
    i_max, _ = qfi_max(m, pert, omega)
    smallest_decay = float(np.min(np.abs(eigenvalues(effective_hamiltonian(m)).imag)))
    return i_max * 16.0 * smallest_decay**2


def phase_response(
    m: ScatteringModel,
    pert: Perturbation,
    omega: float,
    epsilon_grid: Sequence[float],
) -> PhaseResponse:
    """Transmission phase of a single-channel system versus epsilon.

    phi(epsilon) = arg S(epsilon) unwrapped along the grid and gauged so that
    phi(0) = 0; 4 (dphi/depsilon)^2 at epsilon = 0 is the QFI.
    """
    if m.n_channels != 1:
        raise MultiChannelError(
            f"The phase route needs a single channel, model has {m.n_channels}"
        )
    _require_compatible(m, pert)
    grid = np.asarray(epsilon_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("epsilon_grid must be strictly increasing with at least 2 points")

    h = effective_hamiltonian(m)
    s0 = _s_matrix(h, m.w, omega)[0, 0]

    def s_at(epsilon: float) -> complex:
        return _s_matrix(h + epsilon * pert.h1, m.w, omega)[0, 0]

    samples = np.array([s_at(eps) for eps in grid])
    worst = float(np.max(np.abs(np.abs(samples) - 1.0)))
    if worst > UNITARITY_TOL:
        logger.warn(f"|S| deviates from 1 by {worst:.3e} on the epsilon grid")

    phase = np.unwrap(np.angle(samples / s0))
    steps = np.abs(np.diff(phase))
    if np.any(steps > PHASE_STEP_LIMIT):
        k = int(np.argmax(steps))
        raise GridRefinementError(
            f"Phase jumps by {steps[k]:.3f} rad between epsilon = {grid[k]:.6g} "
            f"and {grid[k + 1]:.6g}; refine the grid"
        )
    nearest = int(np.argmin(np.abs(grid)))
    phase = phase - 2 * math.pi * round(phase[nearest] / (2 * math.pi))

    decays = np.abs(eigenvalues(h).imag)
    width = float(np.min(decays)) if np.min(decays) > 0 else m.gamma_ref
    step = PHASE_STEP_FRACTION * width

    def phi(epsilon: float) -> float:
        return float(np.angle(s_at(epsilon) / s0))

    derivative = (
        -phi(2 * step) + 8 * phi(step) - 8 * phi(-step) + phi(-2 * step)
    ) / (12 * step)
    return PhaseResponse(
        epsilon_grid=grid.tolist(), phase=phase.tolist(), dphase_deps=derivative
    )


def cramer_rao(qfi: float, trials: int = 1) -> float:
    """Smallest achievable standard deviation of epsilon: 1 / sqrt(m * I)."""
    if qfi <= 0:
        raise ValueError(f"QFI must be positive, got {qfi}")
    if trials < 1:
        raise ValueError(f"Number of trials must be at least 1, got {trials}")
    return 1.0 / math.sqrt(trials * qfi)


def evaluate(
    m: ScatteringModel,
    pert: Perturbation,
    omega: float = 0.0,
    u_in: Optional[CVec] = None,
) -> QfiEvaluation:
    """Every QFI figure of merit at one frequency.

    `u_in` defaults to light entering the first observed channel; the
    reduced QFI uses that channel for input and output.
    """
    channel = m.observed_channels[0]
    if u_in is None:
        u_in = np.zeros(m.n_channels, dtype=np.complex128)
        u_in[channel] = 1.0

    i_max, optimal_input = qfi_max(m, pert, omega)
    if pert.localized_site is not None:
        i_reduced = reduced_qfi(m, pert, omega, channel, channel)
    else:
        i_reduced = reduced_qfi_channel(m, pert, omega, channel, channel)

    try:
        decomposition = kato_decompose(effective_hamiltonian(m))
        cluster = dominant_cluster(decomposition, omega)
        # The localized bound does not hold for extended perturbations
        localized = (
            qfi_bound_localized(decomposition, cluster, omega)
            if pert.localized_site is not None
            else math.nan
        )
        bounds = QfiBounds(
            localized=localized,
            general=qfi_bound_general(m, pert, decomposition, cluster, omega),
        )
    except IllConditionedError as e:
        logger.warn(f"Bounds unavailable: {e}")
        bounds = QfiBounds(localized=math.nan, general=math.nan)

    return QfiEvaluation(
        omega=omega,
        i_input=qfi_for_input(m, pert, omega, u_in),
        i_max=i_max,
        i_avg=qfi_average(m, pert, omega),
        i_reduced=i_reduced,
        optimal_input=optimal_input,
        q_operator=wigner_smith(m, pert, omega),
        bounds=bounds,
    )
