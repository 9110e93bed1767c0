"""
figures.py

Data series of the reference coupled-ring EP sensing plots:

    fig2   lossless two-ring QFI, long-lived-mode term, its bound and the
           decay-modified QFI versus |V| / gamma
    fig3   transmission phase and local QFI versus epsilon for the EP and the
           isolated mode
    fig4a  reduced QFI with internal loss versus kappa / gamma
    fig4b  kappa^2-scaled reduced QFI versus gamma / kappa
    fig5   two-ring reduced QFI versus |V| / gamma at three loss rates
    fig6   eigenfrequencies at the optimal coupling versus kappa / gamma

Each builder returns a SweepResult whose first column is the abscissa.
"""

from __future__ import annotations

import math
from typing import Callable, Dict, List, Optional

import numpy as np

from epsense.errors import IllConditionedError, NearDefectiveError
from epsense.logger import logger
from epsense.losses import critical_loss, optimal_coupling, optimal_coupling_closed
from epsense.model import (
    build_single_ring,
    build_two_ring,
    effective_hamiltonian,
    isolated_reference,
    perturbed,
)
from epsense.numerics import eigenvalues
from epsense.qfi import (
    decay_modified_qfi,
    long_lived_contribution,
    phase_response,
    qfi_max,
    reduced_qfi,
)
from epsense.sensing_types import GridSpec, SingleRing, SweepResult, TwoRing
from epsense.spectral import kato_decompose, qfi_bound_localized
from epsense.sweep import model_metadata
from epsense.utils import with_points

FIGURE_IDS = ("fig2", "fig3", "fig4a", "fig4b", "fig5", "fig6")

DEFAULT_GRIDS: Dict[str, GridSpec] = {
    "fig2": GridSpec(start=0.05, stop=0.6, points=111),
    "fig3": GridSpec(start=-0.25, stop=0.25, points=201),
    "fig4a": GridSpec(start=0.01, stop=1.0, points=100),
    "fig4b": GridSpec(start=0.1, stop=100.0, points=61, scale="log"),
    "fig5": GridSpec(start=0.05, stop=0.6, points=111),
    "fig6": GridSpec(start=0.0, stop=1.0, points=101),
}

FIG5_KAPPAS = (0.05, None, 0.4)


def _columns(abscissa: str, grid: np.ndarray) -> Dict[str, List[float]]:
    return {abscissa: [float(x) for x in grid]}


def fig2(grid: np.ndarray, gamma: float = 1.0) -> SweepResult:
    # Exact EP inserted so the maximum of i_mod lies on the grid
    grid = _with_ep(grid)
    columns = _columns("v_over_gamma", grid)
    i_max_col, long_col, bound_col, mod_col = [], [], [], []
    for x in grid:
        model, pert = build_two_ring(TwoRing(gamma=gamma, v=x * gamma))
        i_max, _ = qfi_max(model, pert, 0.0)
        i_max_col.append(gamma**2 * i_max)
        mod_col.append(decay_modified_qfi(model, pert, 0.0))

        long_lived, bound = math.nan, math.nan
        if x < 0.25:
            try:
                long_lived = gamma**2 * long_lived_contribution(model, pert, 0.0)
                decomposition = kato_decompose(effective_hamiltonian(model))
                bound = gamma**2 * qfi_bound_localized(decomposition, 0, 0.0)
            except (IllConditionedError, NearDefectiveError) as e:
                logger.warn(f"Long-lived mode undefined at |V|/gamma = {x:.6g}: {e}")
        long_col.append(long_lived)
        bound_col.append(bound)

    columns["i_max_gamma2"] = i_max_col
    columns["long_lived_gamma2"] = long_col
    columns["long_lived_bound_gamma2"] = bound_col
    columns["i_mod"] = mod_col
    return SweepResult(
        parameter="v_over_gamma",
        columns=columns,
        metadata=model_metadata(TwoRing(gamma=gamma)),
    )


def _with_ep(grid: np.ndarray) -> np.ndarray:
    if grid[0] < 0.25 < grid[-1]:
        return with_points(grid, [0.25])
    return grid


def fig3(grid: np.ndarray, gamma: float = 1.0) -> SweepResult:
    """Transmission phase and local QFI of the EP and the isolated mode versus epsilon.

    Both systems are single-channel and lossless, so 4 (dphi/deps)^2 equals
    4 ||dS||^2. The QFI columns use the latter at each perturbed model, which
    needs no numerical differentiation of the phase grid.
    """
    epsilons = grid * gamma
    ep_model, ep_pert = build_two_ring(TwoRing(gamma=gamma))
    iso_model, iso_pert = isolated_reference(gamma / 4, gamma_ref=gamma)

    columns = _columns("epsilon_over_gamma", grid)
    for tag, model, pert in (("ep", ep_model, ep_pert), ("isolated", iso_model, iso_pert)):
        response = phase_response(model, pert, 0.0, epsilons)
        columns[f"phase_{tag}"] = response.phase
        columns[f"qfi_{tag}_gamma2"] = [
            gamma**2 * qfi_max(perturbed(model, pert, eps), pert, 0.0)[0]
            for eps in epsilons
        ]

    metadata = model_metadata(TwoRing(gamma=gamma))
    metadata["reference"] = f"single ring with decay rate {gamma / 4:.17g}"
    metadata["qfi_route"] = "4 ||dS/deps||^2, equal to 4 (dphi/deps)^2 for one lossless channel"
    return SweepResult(parameter="epsilon_over_gamma", columns=columns, metadata=metadata)


def _reduced_columns(
    gammas: np.ndarray, kappas: np.ndarray, scale: Callable[[float, float], float]
) -> Dict[str, List[float]]:
    ep, isolated, optimal = [], [], []
    for gamma, kappa in zip(gammas, kappas):
        factor = scale(gamma, kappa)
        model, pert = build_two_ring(TwoRing(gamma=gamma, kappa=kappa))
        ep.append(factor * reduced_qfi(model, pert, 0.0))
        model, pert = build_single_ring(SingleRing(gamma=gamma, kappa=kappa))
        isolated.append(factor * reduced_qfi(model, pert, 0.0))
        optimal.append(factor * optimal_coupling(gamma, kappa)[1] if kappa > 0 else math.inf)
    return {"ep": ep, "isolated": isolated, "optimal": optimal}


def fig4a(grid: np.ndarray, gamma: float = 1.0) -> SweepResult:
    columns = _columns("kappa_over_gamma", grid)
    curves = _reduced_columns(
        np.full_like(grid, gamma), grid * gamma, lambda g, k: g**2
    )
    for tag, values in curves.items():
        columns[f"i_red_{tag}_gamma2"] = values
    metadata = model_metadata(TwoRing(gamma=gamma))
    metadata["critical_loss_over_gamma"] = format(critical_loss(gamma) / gamma, ".17g")
    return SweepResult(parameter="kappa_over_gamma", columns=columns, metadata=metadata)


def fig4b(grid: np.ndarray, kappa: float = 1.0) -> SweepResult:
    columns = _columns("gamma_over_kappa", grid)
    curves = _reduced_columns(
        grid * kappa, np.full_like(grid, kappa), lambda g, k: k**2
    )
    for tag, values in curves.items():
        columns[f"i_red_{tag}_kappa2"] = values
    metadata = model_metadata(TwoRing(gamma=kappa, kappa=kappa))
    metadata["kappa"] = format(kappa, ".17g")
    return SweepResult(parameter="gamma_over_kappa", columns=columns, metadata=metadata)


def fig5(grid: np.ndarray, gamma: float = 1.0) -> SweepResult:
    columns = _columns("v_over_gamma", grid)
    kappa_c = critical_loss(gamma) / gamma
    for ratio in FIG5_KAPPAS:
        ratio = kappa_c if ratio is None else ratio
        values = []
        for x in grid:
            model, pert = build_two_ring(TwoRing(gamma=gamma, v=x * gamma, kappa=ratio * gamma))
            values.append(gamma**2 * reduced_qfi(model, pert, 0.0))
        columns[f"i_red_gamma2_kappa_{ratio:.4f}"] = values
    metadata = model_metadata(TwoRing(gamma=gamma))
    metadata["kappa_over_gamma"] = ", ".join(
        format(kappa_c if r is None else r, ".17g") for r in FIG5_KAPPAS
    )
    return SweepResult(parameter="v_over_gamma", columns=columns, metadata=metadata)


def fig6(grid: np.ndarray, gamma: float = 1.0) -> SweepResult:
    columns = _columns("kappa_over_gamma", grid)
    names = ("re_omega_1", "im_omega_1", "re_omega_2", "im_omega_2")
    for name in names:
        columns[name] = []
    for x in grid:
        kappa = x * gamma
        v_opt = optimal_coupling_closed(gamma, kappa)
        model, _ = build_two_ring(TwoRing(gamma=gamma, v=v_opt, kappa=kappa))
        values = eigenvalues(effective_hamiltonian(model)) / gamma
        columns["re_omega_1"].append(float(values[0].real))
        columns["im_omega_1"].append(float(values[0].imag))
        columns["re_omega_2"].append(float(values[1].real))
        columns["im_omega_2"].append(float(values[1].imag))
    metadata = model_metadata(TwoRing(gamma=gamma))
    metadata["coupling"] = "|V| = sqrt((gamma + kappa) kappa / 4)"
    return SweepResult(parameter="kappa_over_gamma", columns=columns, metadata=metadata)


def build_figure(
    figure_id: str,
    grid: Optional[GridSpec] = None,
    gamma: float = 1.0,
    kappa: float = 1.0,
) -> SweepResult:
    if figure_id not in DEFAULT_GRIDS:
        raise ValueError(f"Unknown figure '{figure_id}', expected one of {FIGURE_IDS}")
    spec = DEFAULT_GRIDS[figure_id] if grid is None else grid
    values = spec.values()
    logger.info(f"Building {figure_id} on {len(values)} grid points")
    match figure_id:
        case "fig2":
            return fig2(values, gamma)
        case "fig3":
            return fig3(values, gamma)
        case "fig4a":
            return fig4a(values, gamma)
        case "fig4b":
            return fig4b(values, kappa)
        case "fig5":
            return fig5(values, gamma)
        case "fig6":
            return fig6(values, gamma)
        case _:
            raise ValueError(f"Unknown figure: {figure_id}")
