"""
model.py

Builders for the scattering systems this package analyses: the coupled
microring zoo (two rings at an EP2, three rings at an EP3, the isolated
single ring, the ring with a partial mirror) and helpers that work on any
user-defined ScatteringModel.

All builders fix the bare ring frequency at 0 and return the model together
with the perturbation it is meant to sense. Only the clockwise two-mode
subsystem of the rings is modelled; it decouples from the counter-clockwise
one.
"""

from __future__ import annotations

import math
from typing import Literal, Tuple

import numpy as np

from epsense.logger import logger
from epsense.numerics import CMat, adjoint, identity
from epsense.sensing_types import (
    MirrorRing,
    ModelParams,
    Perturbation,
    ScatteringModel,
    SingleRing,
    ThreeRing,
    TwoRing,
)


def effective_hamiltonian(m: ScatteringModel) -> CMat:
    """H = h_sys - i W W^H."""
    return m.h_sys - 1j * (m.w @ adjoint(m.w))


def decay_operator(m: ScatteringModel) -> CMat:
    """Gamma = i (H - H^H) = 2 W W^H, positive semidefinite for passive models."""
    h = effective_hamiltonian(m)
    return 1j * (h - adjoint(h))


def with_internal_loss(m: ScatteringModel, kappa: float) -> ScatteringModel:
    """Append one auxiliary loss channel per cavity, column sqrt(kappa/2) e_j.

    The new channels are recorded in `loss_channels` and are never observed.
    """
    if kappa < 0:
        raise ValueError(f"Internal loss rate must be non-negative, got {kappa}")
    if kappa == 0:
        return m

    n = m.n_modes
    first = m.n_channels
    loss_columns = math.sqrt(kappa / 2) * identity(n)
    return ScatteringModel(
        h_sys=m.h_sys,
        w=np.hstack([m.w, loss_columns]),
        observed_channels=m.observed_channels,
        loss_channels=(*m.loss_channels, *range(first, first + n)),
        omega_ref=m.omega_ref,
        gamma_ref=m.gamma_ref,
        label=m.label,
    )


def perturbed(m: ScatteringModel, pert: Perturbation, epsilon: float) -> ScatteringModel:
    """The model with h_sys replaced by h_sys + epsilon * h1."""
    if pert.h1.shape != m.h_sys.shape:
        raise ValueError(
            f"Perturbation shape {pert.h1.shape} does not match model {m.h_sys.shape}"
        )
    return ScatteringModel(
        h_sys=m.h_sys + epsilon * pert.h1,
        w=m.w,
        observed_channels=m.observed_channels,
        loss_channels=m.loss_channels,
        omega_ref=m.omega_ref,
        gamma_ref=m.gamma_ref,
        label=m.label,
    )


def coupling_perturbation(
    n_modes: int,
    row: int,
    col: int,
    quadrature: Literal["magnitude", "phase"] = "magnitude",
) -> Perturbation:
    """Generator of a change of the coupling between cavities `row` and `col`.

    `magnitude` varies a real coupling (|row><col| + |col><row|); `phase`
    rotates its phase (i|row><col| - i|col><row|).
    """
    if row == col:
        raise ValueError("A coupling perturbation needs two distinct cavities")
    for site in (row, col):
        if not 0 <= site < n_modes:
            raise ValueError(f"Cavity index {site} outside 0..{n_modes - 1}")

    h1 = np.zeros((n_modes, n_modes), dtype=np.complex128)
    match quadrature:
        case "magnitude":
            h1[row, col] = 1.0
            h1[col, row] = 1.0
        case "phase":
            h1[row, col] = 1j
            h1[col, row] = -1j
        case _:
            raise ValueError(f"Unknown coupling quadrature: {quadrature}")
    return Perturbation(h1=h1, label=f"coupling {quadrature} ({row}, {col})")


# --- Model zoo ---


def build_two_ring(p: TwoRing) -> Tuple[ScatteringModel, Perturbation]:
    v = p.coupling
    h_sys = np.array([[0.0, np.conj(v)], [v, 0.0]], dtype=np.complex128)
    w = np.array([[math.sqrt(p.gamma / 2)], [0.0]], dtype=np.complex128)
    model = ScatteringModel(
        h_sys=h_sys, w=w, observed_channels=(0,), gamma_ref=p.gamma, label="two-ring"
    )
    return with_internal_loss(model, p.kappa), Perturbation.localized(2, 1)


def build_three_ring(p: ThreeRing) -> Tuple[ScatteringModel, Perturbation]:
    v1, v2 = p.coupling1, p.coupling2
    h_sys = np.array(
        [
            [0.0, np.conj(v1), 0.0],
            [v1, 0.0, np.conj(v2)],
            [0.0, v2, 0.0],
        ],
        dtype=np.complex128,
    )
    w = np.zeros((3, 1), dtype=np.complex128)
    w[0, 0] = math.sqrt(p.gamma / 2)
    model = ScatteringModel(
        h_sys=h_sys, w=w, observed_channels=(0,), gamma_ref=p.gamma, label="three-ring"
    )
    return with_internal_loss(model, p.kappa), Perturbation.localized(3, 2)


def build_single_ring(p: SingleRing) -> Tuple[ScatteringModel, Perturbation]:
    model = ScatteringModel(
        h_sys=np.zeros((1, 1), dtype=np.complex128),
        w=np.array([[math.sqrt(p.waveguide_coupling / 2)]], dtype=np.complex128),
        observed_channels=(0,),
        gamma_ref=p.gamma,
        label="single-ring",
    )
    return with_internal_loss(model, p.kappa), Perturbation.localized(1, 0)


def build_mirror_ring(p: MirrorRing) -> Tuple[ScatteringModel, Perturbation]:
    """Ring coupled to a waveguide that ends in a partial mirror.

    Traveling-wave basis: light leaving the ring from mode 0 is partly
    reflected by the mirror into mode 1, never the other way round. The
    Hermitian part cancels the upper-right entry of -i W W^H so the
    effective Hamiltonian keeps only that one-way coupling.
    """
    tau = math.sqrt(max(0.0, 1.0 - p.rho**2))
    phase = complex(math.cos(p.phi), math.sin(p.phi))
    w = math.sqrt(p.gamma / 2) * np.array(
        [[1.0, 0.0], [p.rho * phase**2, tau * phase]], dtype=np.complex128
    )
    half = p.gamma * p.rho / 2
    h_sys = np.array(
        [[0.0, 1j * half * np.conj(phase) ** 2], [-1j * half * phase**2, 0.0]],
        dtype=np.complex128,
    )
    model = ScatteringModel(
        h_sys=h_sys,
        w=w,
        observed_channels=(0, 1),
        gamma_ref=p.gamma,
        label="mirror-ring",
    )
    h1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
    pert = Perturbation(h1=h1, label="backscattering")
    return with_internal_loss(model, p.kappa), pert


def build_model(params: ModelParams) -> Tuple[ScatteringModel, Perturbation]:
    logger.debug(f"Building {params.kind} model: {params.model_dump()}")
    match params:
        case TwoRing():
            return build_two_ring(params)
        case ThreeRing():
            return build_three_ring(params)
        case SingleRing():
            return build_single_ring(params)
        case MirrorRing():
            return build_mirror_ring(params)
        case _:
            raise ValueError(f"Unknown model kind: {params!r}")


def isolated_reference(
    decay: float, kappa: float = 0.0, gamma_ref: float = 1.0
) -> Tuple[ScatteringModel, Perturbation]:
    """Single ring whose waveguide-limited decay rate equals `decay`.

    Used as the comparison mode for an EP with the same decay rate: decay
    gamma/4 for the two-ring EP, gamma/6 for the three-ring EP.
    """
    if decay <= 0:
        raise ValueError(f"Reference decay rate must be positive, got {decay}")
    return build_single_ring(SingleRing(gamma=gamma_ref, gamma_wg=2 * decay, kappa=kappa))
