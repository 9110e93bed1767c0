"""
losses.py

Sensing with uniform internal losses. Every cavity leaks at rate kappa into
an unobserved auxiliary channel, so only the reduced QFI of the waveguide
transmission is accessible.

Closed forms for the two-ring and single-ring systems live next to numerical
routines that work on the channel-augmented models directly: the optimal
intercavity coupling, the critical loss where the EP stops beating an
isolated mode, and the waveguide coupling that maximizes kappa^2 * I_red.
"""

from __future__ import annotations

import math
from typing import Literal, Tuple

from scipy.optimize import brentq, minimize_scalar

from epsense.errors import NoConvergenceError
from epsense.logger import logger
from epsense.model import build_single_ring, build_two_ring
from epsense.qfi import reduced_qfi
from epsense.sensing_types import SingleRing, TwoRing

OPTIMIZER_XATOL = 1e-12
ROOT_XTOL = 1e-14


# --- Closed forms ---


def reduced_qfi_two_ring(gamma: float, v: float, kappa: float) -> float:
    """4 |V|^4 gamma^2 / ((gamma + kappa) kappa / 4 + |V|^2)^4."""
    v_sq = abs(v) ** 2
    return 4.0 * v_sq**2 * gamma**2 / ((gamma + kappa) * kappa / 4 + v_sq) ** 4


def reduced_qfi_two_ring_ep(gamma: float, kappa: float) -> float:
    return 1024.0 * gamma**6 / (gamma + 2 * kappa) ** 8


def reduced_qfi_single_ring(gamma: float, kappa: float) -> float:
    """Isolated mode with waveguide coupling gamma / 2."""
    return 16.0 * gamma**2 / (gamma / 2 + kappa) ** 4


def optimal_coupling_closed(gamma: float, kappa: float) -> float:
    return math.sqrt((gamma + kappa) * kappa / 4)


def reduced_qfi_two_ring_optimal(gamma: float, kappa: float) -> float:
    if kappa <= 0:
        return math.inf
    return 4.0 * gamma**2 / (kappa**2 * (gamma + kappa) ** 2)


def critical_loss_closed(gamma: float) -> float:
    return (math.sqrt(2) - 1) * gamma / 2


# --- Numerical routes on the channel-augmented models ---


def _two_ring_reduced(gamma: float, v: float, kappa: float) -> float:
    model, pert = build_two_ring(TwoRing(gamma=gamma, v=v, kappa=kappa))
    return reduced_qfi(model, pert, 0.0)


def _single_ring_reduced(gamma: float, kappa: float) -> float:
    model, pert = build_single_ring(SingleRing(gamma=gamma, kappa=kappa))
    return reduced_qfi(model, pert, 0.0)


def optimal_coupling(gamma: float, kappa: float) -> Tuple[float, float]:
    """Intercavity coupling |V| maximizing the two-ring reduced QFI.

    Returns (v_opt, I_red(v_opt)). Needs kappa > 0: without loss the QFI
    grows without bound as |V| -> 0.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if kappa <= 0:
        raise ValueError(f"The optimal coupling needs kappa > 0, got {kappa}")

    # V_opt <= (gamma + kappa) / 2
    upper = gamma + kappa
    result = minimize_scalar(
        lambda v: -math.log(_two_ring_reduced(gamma, v, kappa)),
        bounds=(1e-9 * upper, upper),
        method="bounded",
        options={"xatol": OPTIMIZER_XATOL * upper},
    )
    if not result.success:
        raise NoConvergenceError(f"Coupling optimization failed: {result.message}")
    v_opt = float(result.x)
    logger.debug(f"Optimal coupling at gamma={gamma}, kappa={kappa}: |V| = {v_opt:.12g}")
    return v_opt, _two_ring_reduced(gamma, v_opt, kappa)


def critical_loss(gamma: float = 1.0) -> float:
    """Loss rate at which the EP and the isolated mode give equal reduced QFI.

    Below it the two-ring EP senses better than a single ring of the same
    waveguide-limited decay rate.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")

    def log_ratio(kappa: float) -> float:
        ep = _two_ring_reduced(gamma, gamma / 4, kappa)
        return math.log(ep) - math.log(_single_ring_reduced(gamma, kappa))

    kappa_c = brentq(log_ratio, 1e-6 * gamma, gamma, xtol=ROOT_XTOL * gamma)
    return float(kappa_c)


def critical_waveguide_coupling(
    kappa: float, system: Literal["isolated", "ep"] = "isolated"
) -> float:
    """Waveguide coupling gamma maximizing kappa^2 * I_red at fixed loss.

    Critical coupling: gamma = 2 kappa for the isolated mode, gamma = 6 kappa
    for the two-ring EP.
    """
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")

    match system:
        case "isolated":
            def objective(gamma: float) -> float:
                return -math.log(_single_ring_reduced(gamma, kappa))
        case "ep":
            def objective(gamma: float) -> float:
                return -math.log(_two_ring_reduced(gamma, gamma / 4, kappa))
        case _:
            raise ValueError(f"Unknown system: {system}")

    result = minimize_scalar(
        objective,
        bounds=(1e-3 * kappa, 100 * kappa),
        method="bounded",
        options={"xatol": OPTIMIZER_XATOL * kappa},
    )
    if not result.success:
        raise NoConvergenceError(f"Waveguide coupling optimization failed: {result.message}")
    return float(result.x)
