"""
cli.py

Command-line front end.

    epsense report <model> [model flags] [--omega W] [--config FILE]
    epsense sweep (--spec FILE | --model KIND --parameter P --start A --stop B
                  --points N [--outputs a,b]) [--format csv|json] [--out PATH]
    epsense figure <id> [--out PATH] [--start A --stop B --points N]

Exit codes: 0 success, 2 usage or validation error, 3 frequency on a pole,
4 I/O error, 1 any other numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from epsense.config_loader import load_config, load_sweep_spec, parse_model_params
from epsense.errors import AtPoleError, EpsenseError, IllConditionedError, NearDefectiveError
from epsense.figures import DEFAULT_GRIDS, FIGURE_IDS, build_figure
from epsense.logger import logger
from epsense.model import build_model, effective_hamiltonian
from epsense.numerics import eigenvalues
from epsense.qfi import cramer_rao, decay_modified_qfi, evaluate, qfi_max_via_ldos
from epsense.sensing_types import GridSpec, ModelParams, SweepSpec
from epsense.spectral import (
    dominant_cluster,
    enhancement_factor,
    kato_decompose,
    passive_xi_bound,
    petermann_factor,
    spectral_response_strength,
)
from epsense.sweep import run_sweep
from epsense.utils import result_to_json, write_csv, write_text

MODEL_KINDS = ("two-ring", "three-ring", "single-ring", "mirror-ring")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_POLE = 3
EXIT_IO = 4

# CLI flag dest -> model field
MODEL_FLAGS = {
    "gamma": "gamma",
    "v": "v",
    "v1": "v1",
    "v2": "v2",
    "kappa": "kappa",
    "rho": "rho",
    "phi": "phi",
    "gamma_wg": "gamma_wg",
}


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("model parameters")
    group.add_argument("--gamma", type=float, help="Waveguide coupling rate (reporting unit)")
    group.add_argument("--v", type=float, help="Two-ring intercavity coupling |V|")
    group.add_argument("--v1", type=float, help="Three-ring coupling between rings 1 and 2")
    group.add_argument("--v2", type=float, help="Three-ring coupling between rings 2 and 3")
    group.add_argument("--kappa", type=float, help="Uniform internal loss rate")
    group.add_argument("--rho", type=float, help="Mirror reflection coefficient in [0, 1]")
    group.add_argument("--phi", type=float, help="Mirror propagation phase")
    group.add_argument("--gamma-wg", type=float, help="Single-ring waveguide coupling")
    parser.add_argument("--omega", type=float, default=None, help="Evaluation frequency")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epsense",
        description="Quantum Fisher information limits of non-Hermitian scattering sensors",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    report = commands.add_parser("report", help="QFI report for one model at one frequency")
    report.add_argument("model", choices=MODEL_KINDS)
    _add_model_flags(report)
    report.add_argument("--config", type=Path, help="Model parameters (JSON or key = value)")
    report.add_argument("--format", choices=("json",), default="json")
    report.add_argument("--out", type=Path)

    sweep = commands.add_parser("sweep", help="Sweep one parameter over a grid")
    sweep.add_argument("--spec", type=Path, help="Sweep specification (JSON or key = value)")
    sweep.add_argument("--model", choices=MODEL_KINDS)
    _add_model_flags(sweep)
    sweep.add_argument("--parameter")
    sweep.add_argument("--start", type=float)
    sweep.add_argument("--stop", type=float)
    sweep.add_argument("--points", type=int)
    sweep.add_argument("--scale", choices=("linear", "log"))
    sweep.add_argument("--outputs", help="Comma-separated figures of merit")
    sweep.add_argument("--v-policy", choices=("fixed", "ep", "optimal"))
    sweep.add_argument("--workers", type=int)
    sweep.add_argument("--format", choices=("csv", "json"), default="csv")
    sweep.add_argument("--out", type=Path)

    figure = commands.add_parser("figure", help="Write the data series of a reference plot")
    figure.add_argument("figure_id", choices=FIGURE_IDS)
    figure.add_argument("--out", type=Path)
    figure.add_argument("--start", type=float)
    figure.add_argument("--stop", type=float)
    figure.add_argument("--points", type=int)
    figure.add_argument("--gamma", type=float, default=1.0)
    figure.add_argument("--kappa", type=float, default=1.0, help="Fixed loss rate of fig4b")
    figure.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def _model_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        field: getattr(args, dest)
        for dest, field in MODEL_FLAGS.items()
        if getattr(args, dest, None) is not None
    }


def resolve_model(kind: str, base: Dict[str, Any], overrides: Dict[str, Any]) -> ModelParams:
    """Config-file values overridden by flags, validated for `kind`."""
    params = parse_model_params(kind, {})
    unknown = [name for name in overrides if name not in type(params).model_fields]
    if unknown:
        raise ValueError(f"Model '{kind}' does not take {', '.join('--' + n for n in unknown)}")
    return parse_model_params(kind, {**base, **overrides})


def _finite_or_none(value: Optional[float]) -> Optional[float]:
    if value is None or not math.isfinite(value):
        return None
    return float(value)


def _complex_list(values) -> List[Dict[str, float]]:
    return [{"re": float(z.real), "im": float(z.imag)} for z in values]


def build_report(params: ModelParams, omega: float = 0.0) -> Dict[str, Any]:
    """Every figure of merit of one model at one frequency, JSON-ready."""
    model, pert = build_model(params)
    h = effective_hamiltonian(model)
    evaluation = evaluate(model, pert, omega)
    gamma_sq = model.gamma_ref**2
    values = eigenvalues(h)

    petermann: List[Optional[float]] = []
    for mode in range(len(values)):
        try:
            petermann.append(petermann_factor(h, mode))
        except NearDefectiveError:
            petermann.append(None)

    report: Dict[str, Any] = {
        "model": params.kind,
        "parameters": params.model_dump(),
        "omega": omega,
        "eigenvalues": _complex_list(values),
        "decay_rates": [float(abs(z.imag)) for z in values],
        "petermann": petermann,
        "i_input": evaluation.i_input,
        "i_max": evaluation.i_max,
        "i_max_gamma2": evaluation.i_max * gamma_sq,
        "i_avg": evaluation.i_avg,
        "i_avg_gamma2": evaluation.i_avg * gamma_sq,
        "i_reduced": evaluation.i_reduced,
        "i_reduced_gamma2": _finite_or_none(
            None if evaluation.i_reduced is None else evaluation.i_reduced * gamma_sq
        ),
        "bound_localized": _finite_or_none(evaluation.bounds.localized),
        "bound_localized_gamma2": _finite_or_none(evaluation.bounds.localized * gamma_sq),
        "bound_general": _finite_or_none(evaluation.bounds.general),
        "bound_general_gamma2": _finite_or_none(evaluation.bounds.general * gamma_sq),
        "optimal_input": _complex_list(evaluation.optimal_input),
        "cramer_rao_floor": cramer_rao(evaluation.i_max) if evaluation.i_max > 0 else None,
    }

    if pert.localized_site is not None:
        report["i_max_ldos_gamma2"] = qfi_max_via_ldos(model, pert, omega) * gamma_sq
    if not model.loss_channels:
        report["i_mod"] = decay_modified_qfi(model, pert, omega)

    try:
        decomposition = kato_decompose(h)
    except IllConditionedError as e:
        logger.warn(f"Spectral response strength unavailable: {e}")
        return report

    index = dominant_cluster(decomposition, omega)
    cluster = decomposition.clusters[index]
    xi = spectral_response_strength(decomposition, index)
    report.update(
        {
            "cluster_eigenvalue": {"re": cluster.omega.real, "im": cluster.omega.imag},
            "cluster_order": cluster.order,
            "ep_order": cluster.ep_order,
            "is_exceptional": cluster.is_exceptional,
            "xi": xi,
        }
    )
    if cluster.is_exceptional and cluster.decay > 0:
        bound = passive_xi_bound(cluster.decay, cluster.ep_order)
        report["enhancement_factor"] = enhancement_factor(xi, cluster.decay, cluster.ep_order)
        report["passive_bound"] = bound.model_dump()
    return report


def cmd_report(args: argparse.Namespace) -> int:
    base = load_config(args.config) if args.config is not None else {}
    base.pop("model", None)
    omega = args.omega if args.omega is not None else float(base.pop("omega", 0.0))
    params = resolve_model(args.model, base, _model_overrides(args))
    report = build_report(params, omega)
    write_text(json.dumps(report, indent=2), args.out)
    return EXIT_OK


def _sweep_spec_from_flags(args: argparse.Namespace) -> SweepSpec:
    if args.spec is not None:
        spec = load_sweep_spec(args.spec)
        if args.workers is not None:
            spec = spec.model_copy(update={"workers": args.workers})
        return spec

    missing = [
        flag
        for flag, value in (
            ("--model", args.model),
            ("--parameter", args.parameter),
            ("--start", args.start),
            ("--stop", args.stop),
            ("--points", args.points),
        )
        if value is None
    ]
    if missing:
        raise ValueError(f"sweep needs --spec or {', '.join(missing)}")

    outputs = ["i_max_gamma2"] if args.outputs is None else args.outputs.split(",")
    workers = args.workers or int(os.getenv("EPSENSE_WORKERS", "1"))
    return SweepSpec(
        model=resolve_model(args.model, {}, _model_overrides(args)),
        parameter=args.parameter,
        grid=GridSpec(
            start=args.start,
            stop=args.stop,
            points=args.points,
            scale=args.scale or "linear",
        ),
        outputs=[name.strip() for name in outputs if name.strip()],
        omega=args.omega or 0.0,
        v_policy=args.v_policy or "fixed",
        workers=workers,
    )


def _emit(result, fmt: str, out: Optional[Path]) -> None:
    if fmt == "json":
        write_text(result_to_json(result), out)
    else:
        write_csv(result, out)
    if out is not None:
        logger.info(f"Wrote {result.n_rows} rows to {out}")


def cmd_sweep(args: argparse.Namespace) -> int:
    result = run_sweep(_sweep_spec_from_flags(args))
    _emit(result, args.format, args.out)
    return EXIT_OK


def cmd_figure(args: argparse.Namespace) -> int:
    grid = None
    if args.start is not None or args.stop is not None or args.points is not None:
        default = DEFAULT_GRIDS[args.figure_id]
        grid = GridSpec(
            start=default.start if args.start is None else args.start,
            stop=default.stop if args.stop is None else args.stop,
            points=default.points if args.points is None else args.points,
            scale=default.scale,
        )
    result = build_figure(args.figure_id, grid, gamma=args.gamma, kappa=args.kappa)
    _emit(result, args.format, args.out)
    return EXIT_OK


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        match args.command:
            case "report":
                return cmd_report(args)
            case "sweep":
                return cmd_sweep(args)
            case "figure":
                return cmd_figure(args)
            case _:
                parser.error(f"Unknown command {args.command}")
    except AtPoleError as e:
        logger.error(f"Evaluation frequency on a pole: {e}")
        return EXIT_POLE
    except (ValidationError, ValueError) as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_IO
    except EpsenseError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_FAILURE
    return EXIT_FAILURE

