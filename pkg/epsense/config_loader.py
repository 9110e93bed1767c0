"""
config_loader.py

Loads model parameters and sweep specifications from JSON files or from
plain `key = value` text files, and validates them into the pydantic types
of sensing_types.

Key-value grammar: one `key = value` per line, `#` starts a comment, blank
lines are ignored. Lists (the sweep `outputs`) are comma separated.
"""

import json
from pathlib import Path
from typing import Any, Dict

from epsense.logger import logger
from epsense.sensing_types import (
    GridSpec,
    MirrorRing,
    ModelParams,
    SingleRing,
    SweepSpec,
    ThreeRing,
    TwoRing,
)

GRID_KEYS = ("start", "stop", "points", "scale")
SWEEP_KEYS = ("parameter", "outputs", "omega", "v_policy", "workers")
LIST_KEYS = ("outputs",)


def load_json(path) -> Any:
    """Load and parse a JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError as e:
        raise FileNotFoundError(f"File not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ValueError(f"Failed to parse {path} as JSON: {e}") from e


def parse_key_value(text: str, source: str = "<string>") -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{number}: expected 'key = value', got '{raw.strip()}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ValueError(f"{source}:{number}: missing key")
        if key in values:
            logger.warn(f"{source}:{number}: '{key}' set twice, keeping the last value")
        if key in LIST_KEYS:
            values[key] = [item.strip() for item in value.split(",") if item.strip()]
        else:
            values[key] = value
    return values


def load_key_value(path) -> Dict[str, Any]:
    """Load a `key = value` file into a dict of strings (lists for `outputs`)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise FileNotFoundError(f"File not found: {path}") from e
    return parse_key_value(text, str(path))


def load_config(path) -> Dict[str, Any]:
    """JSON for `.json` files, the key-value grammar for anything else."""
    if Path(path).suffix.lower() == ".json":
        data = load_json(path)
        if not isinstance(data, dict):
            raise ValueError(f"{path}: expected a JSON object at the top level")
        return data
    return load_key_value(path)


def parse_model_params(kind: str, values: Dict[str, Any]) -> ModelParams:
    """Validate model parameters for the given model kind."""
    fields = {k: v for k, v in values.items() if k != "kind"}
    match kind:
        case "two-ring":
            return TwoRing(**fields)
        case "three-ring":
            return ThreeRing(**fields)
        case "single-ring":
            return SingleRing(**fields)
        case "mirror-ring":
            return MirrorRing(**fields)
        case _:
            raise ValueError(f"Unknown model '{kind}'")


def parse_sweep_spec(values: Dict[str, Any]) -> SweepSpec:
    """Build a SweepSpec from a flat dict or from the nested JSON layout.

    Flat dicts hold `model` (the kind), the model parameters, the grid keys
    and the sweep keys side by side; JSON files may instead nest `model` and
    `grid` objects.
    """
    if isinstance(values.get("model"), dict):
        return SweepSpec.model_validate(values)

    remaining = dict(values)
    kind = remaining.pop("model", None)
    if kind is None:
        raise ValueError("Sweep specification needs a 'model' entry")
    grid = {k: remaining.pop(k) for k in GRID_KEYS if k in remaining}
    sweep = {k: remaining.pop(k) for k in SWEEP_KEYS if k in remaining}
    return SweepSpec(
        model=parse_model_params(kind, remaining),
        grid=GridSpec(**grid),
        **sweep,
    )


def load_sweep_spec(path) -> SweepSpec:
    spec = parse_sweep_spec(load_config(path))
    logger.debug(f"Loaded sweep over '{spec.parameter}' from {path}")
    return spec
