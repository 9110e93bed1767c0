"""
sweep.py

One-parameter sweeps over the model zoo. Every grid point is independent, so
rows are evaluated on a thread pool; the result keeps grid order regardless
of the number of workers.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from importlib.metadata import PackageNotFoundError, version
from typing import Dict, List, Tuple

import numpy as np

from epsense.errors import (
    AtPoleError,
    IllConditionedError,
    NearDefectiveError,
)
from epsense.logger import logger
from epsense.losses import optimal_coupling_closed
from epsense.model import build_model, effective_hamiltonian, perturbed
from epsense.numerics import eigenvalues
from epsense.qfi import (
    decay_modified_qfi,
    qfi_average,
    qfi_max,
    reduced_qfi,
    reduced_qfi_channel,
    scattering_matrix,
)
from epsense.sensing_types import (
    MODEL_PARAMS_ADAPTER,
    ModelParams,
    Perturbation,
    ScatteringModel,
    SweepResult,
    SweepSpec,
)
from epsense.spectral import (
    dominant_cluster,
    kato_decompose,
    ldos,
    qfi_bound_general,
    qfi_bound_localized,
    spectral_response_strength,
)

UNITS_NOTE = (
    "QFI per unit incoming photon flux; *_gamma2 columns are multiplied by "
    "gamma^2, *_kappa2 by kappa^2"
)


def package_version() -> str:
    try:
        return version("epsense")
    except PackageNotFoundError:
        return "unknown"


def model_metadata(params: ModelParams) -> Dict[str, str]:
    return {
        "model": params.kind,
        "parameters": json.dumps(params.model_dump(), sort_keys=True),
        "units": UNITS_NOTE,
        "version": package_version(),
    }


def _row_params(spec: SweepSpec, value: float) -> Tuple[ModelParams, float, float]:
    """Model parameters, epsilon and omega of the row at `value`."""
    data = spec.model.model_dump()
    epsilon, omega = 0.0, spec.omega
    match spec.parameter:
        case "epsilon":
            epsilon = value
        case "omega":
            omega = value
        case name:
            data[name] = value

    match spec.v_policy:
        case "ep":
            data["v"] = data["gamma"] / 4
        case "optimal":
            data["v"] = optimal_coupling_closed(data["gamma"], data["kappa"])
    return MODEL_PARAMS_ADAPTER.validate_python(data), epsilon, omega


def _figure_of_merit(
    name: str,
    model: ScatteringModel,
    pert: Perturbation,
    omega: float,
    kappa: float,
) -> float:
    gamma_sq = model.gamma_ref**2
    channel = model.observed_channels[0]
    match name:
        case "i_max" | "i_max_gamma2":
            value, _ = qfi_max(model, pert, omega)
            return value * gamma_sq if name == "i_max_gamma2" else value
        case "i_avg":
            return qfi_average(model, pert, omega)
        case "i_reduced" | "i_reduced_gamma2" | "i_reduced_kappa2":
            if pert.localized_site is not None:
                value = reduced_qfi(model, pert, omega, channel, channel)
            else:
                value = reduced_qfi_channel(model, pert, omega, channel, channel)
            if name == "i_reduced_gamma2":
                return value * gamma_sq
            if name == "i_reduced_kappa2":
                return value * kappa**2
            return value
        case "i_mod":
            return decay_modified_qfi(model, pert, omega)
        case "ldos":
            if pert.localized_site is None:
                return math.nan
            return ldos(model, pert.localized_site, omega).rho
        case "decay_min":
            return float(np.min(np.abs(eigenvalues(effective_hamiltonian(model)).imag)))
        case "phase":
            return float(np.angle(scattering_matrix(model, omega)[channel, channel]))
        case "xi" | "bound_localized" | "bound_general":
            decomposition = kato_decompose(effective_hamiltonian(model))
            cluster = dominant_cluster(decomposition, omega)
            if name == "xi":
                return spectral_response_strength(decomposition, cluster)
            if name == "bound_localized":
                if pert.localized_site is None:
                    return math.nan
                return qfi_bound_localized(decomposition, cluster, omega)
            return qfi_bound_general(model, pert, decomposition, cluster, omega)
        case _:
            raise ValueError(f"Unknown figure of merit: {name}")


def evaluate_row(spec: SweepSpec, value: float) -> Tuple[bool, Dict[str, float]]:
    """Figures of merit at one grid value; (at_pole, values)."""
    params, epsilon, omega = _row_params(spec, value)
    model, pert = build_model(params)
    if epsilon != 0.0:
        model = perturbed(model, pert, epsilon)

    row: Dict[str, float] = {}
    for name in spec.outputs:
        try:
            row[name] = _figure_of_merit(name, model, pert, omega, params.kappa)
        except AtPoleError as e:
            logger.warn(f"{spec.parameter} = {value:.17g} is at a pole: {e}")
            return True, {n: math.nan for n in spec.outputs}
        except (IllConditionedError, NearDefectiveError) as e:
            logger.warn(f"{name} undefined at {spec.parameter} = {value:.17g}: {e}")
            row[name] = math.nan
    return False, row


def run_sweep(spec: SweepSpec) -> SweepResult:
    grid = spec.grid.values()
    logger.info(
        f"Sweeping {spec.parameter} of {spec.model.kind} over {len(grid)} points "
        f"with {spec.workers} worker(s)"
    )
    with ThreadPoolExecutor(max_workers=spec.workers) as executor:
        rows = list(executor.map(lambda v: evaluate_row(spec, float(v)), grid))

    columns: Dict[str, List[float]] = {spec.parameter: [float(v) for v in grid]}
    for name in spec.outputs:
        columns[name] = [row[name] for _, row in rows]
    columns["at_pole"] = [1.0 if at_pole else 0.0 for at_pole, _ in rows]

    poles = sum(1 for at_pole, _ in rows if at_pole)
    if poles:
        logger.warn(f"{poles} grid point(s) sit on a pole and are marked at_pole = 1")

    metadata = model_metadata(spec.model)
    metadata.update(
        {
            "sweep": f"{spec.parameter} {spec.grid.scale} "
            f"[{spec.grid.start:.17g}, {spec.grid.stop:.17g}] x {spec.grid.points}",
            "omega": format(spec.omega, ".17g"),
            "v_policy": spec.v_policy,
        }
    )
    return SweepResult(parameter=spec.parameter, columns=columns, metadata=metadata)
