"""Run configuration: TOML parsing with exhaustive validation.

Every constraint violation in a config file is reported, not just the first;
unknown keys are rejected.  Command-line overrides are dotted key paths
applied to the raw document before validation.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from .energy import Params
from .grid import Grid, make_grid
from .minimizer import SEED_KINDS, SolverConfig
from .potentials import Potential, make_constant, make_multi_well, make_single_well, make_zero

_SCHEMA = {
    "seed": None,
    "params": {"s", "p", "a", "m", "allow_s_outside"},
    "grid": {"n", "L"},
    "potential": {"kind", "V_inf", "value", "x0", "r", "wells"},
    "solver": {"tol_residual", "tol_energy", "step0", "armijo", "max_iter",
               "enforce_nonneg", "seed_kind", "seed_width"},
    "sweep": {"a_list", "a_unit"},
    "outputs": {"directory", "formats"},
}


class ConfigError(ValueError):
    """Carries the complete list of violated constraints."""

    def __init__(self, errors: list[str]):
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(errors))
        self.errors = errors


@dataclass(frozen=True)
class RunConfig:
    params: Params
    grid: Grid
    potential: Potential
    solver: SolverConfig
    seed: int
    sweep_a_list: tuple[float, ...] | None
    sweep_a_unit: str
    output_dir: Path
    output_formats: tuple[str, ...]
    resolved: dict = field(repr=False)


def _check_unknown_keys(doc: dict, errors: list[str]) -> None:
    for key, val in doc.items():
        if key not in _SCHEMA:
            errors.append(f"unknown section or key: {key!r}")
            continue
        allowed = _SCHEMA[key]
        if allowed is None:
            continue
        if not isinstance(val, dict):
            errors.append(f"section {key!r} must be a table")
            continue
        for sub in val:
            if sub not in allowed:
                errors.append(f"unknown key: {key}.{sub}")


def _build_potential(spec: dict, L: float, errors: list[str]) -> Potential | None:
    kind = spec.get("kind")
    try:
        if kind == "zero":
            return make_zero()
        if kind == "constant":
            return make_constant(float(spec.get("value", spec.get("V_inf", 0.0))))
        if kind == "single_well":
            x0 = spec.get("x0", [0.0, 0.0, 0.0])
            return make_single_well(x0, float(spec.get("r", 2.0)),
                                    float(spec.get("V_inf", 1.0)))
        if kind == "multi_well":
            wells = [(w[0], float(w[1])) for w in spec.get("wells", [])]
            return make_multi_well(wells, float(spec.get("V_inf", 1.0)), L=L)
        errors.append(f"potential.kind must be one of zero/constant/single_well/"
                      f"multi_well, got {kind!r}")
    except (ValueError, TypeError, IndexError) as exc:
        errors.append(f"potential: {exc}")
    return None


def config_from_dict(doc: dict) -> RunConfig:
    """Validate a raw (TOML) document; raises ConfigError with every violation."""
    errors: list[str] = []
    _check_unknown_keys(doc, errors)

    pd = doc.get("params", {})
    params = None
    try:
        params = Params(s=float(pd.get("s", 0.9)), p=float(pd.get("p", 2.5)),
                        a=float(pd.get("a", 1.0)), m=float(pd.get("m", 1.0)),
                        allow_s_outside=bool(pd.get("allow_s_outside", False)))
    except (ValueError, AssertionError) as exc:
        errors.append(f"params: {exc}")

    gd = doc.get("grid", {})
    grid = None
    try:
        grid = make_grid(int(gd.get("n", 64)), float(gd.get("L", 16.0)))
    except (ValueError, TypeError) as exc:
        errors.append(f"grid: {exc}")

    pot = None
    if grid is not None:
        pot = _build_potential(doc.get("potential", {"kind": "zero"}),
                               grid.L, errors)

    sd = doc.get("solver", {})
    solver = None
    try:
        solver = SolverConfig(
            tol_residual=float(sd.get("tol_residual", 1e-6)),
            tol_energy=float(sd.get("tol_energy", 1e-13)),
            step0=float(sd.get("step0", 0.1)),
            armijo=float(sd.get("armijo", 1e-4)),
            max_iter=int(sd.get("max_iter", 5000)),
            enforce_nonneg=bool(sd.get("enforce_nonneg", True)),
            seed_kind=str(sd.get("seed_kind", "gaussian")),
            seed_width=float(sd.get("seed_width", 1.0)),
        )
    except ValueError as exc:
        errors.append(f"solver: {exc}")
    if solver is not None and solver.seed_kind not in SEED_KINDS:
        errors.append(f"solver.seed_kind must be one of {SEED_KINDS}")

    sw = doc.get("sweep", {})
    a_list = sw.get("a_list")
    a_unit = sw.get("a_unit", "absolute")
    if a_unit not in ("absolute", "sqrt_astar"):
        errors.append("sweep.a_unit must be 'absolute' or 'sqrt_astar'")
    if a_list is not None:
        try:
            a_list = tuple(float(a) for a in a_list)
            if any(b <= a for a, b in zip(a_list, a_list[1:])):
                errors.append("sweep.a_list must be strictly increasing")
        except (TypeError, ValueError):
            errors.append("sweep.a_list must be a list of numbers")
            a_list = None

    od = doc.get("outputs", {})
    out_dir = Path(od.get("directory", "out"))
    formats = tuple(od.get("formats", ["json", "csv"]))
    for f in formats:
        if f not in ("json", "csv", "fields"):
            errors.append(f"outputs.formats entry {f!r} not in json/csv/fields")

    seed = doc.get("seed", 0)
    if not isinstance(seed, int):
        errors.append("seed must be an integer")

    if errors:
        raise ConfigError(errors)
    return RunConfig(params=params, grid=grid, potential=pot, solver=solver,
                     seed=int(seed), sweep_a_list=a_list, sweep_a_unit=a_unit,
                     output_dir=out_dir, output_formats=formats, resolved=doc)


def parse_config(path) -> RunConfig:
    """Read and validate a TOML run configuration."""
    raw = Path(path).read_bytes()
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"parse error: {exc}"]) from None
    return config_from_dict(doc)


def apply_overrides(doc: dict, overrides: list[tuple[str, str]]) -> dict:
    """Apply dotted-path command-line overrides onto a raw document."""
    import copy

    out = copy.deepcopy(doc)
    for path, text in overrides:
        keys = path.split(".")
        cur = out
        for k in keys[:-1]:
            cur = cur.setdefault(k, {})
        cur[keys[-1]] = _parse_literal(text)
    return out


def _parse_literal(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if text.startswith("["):
        import json

        return json.loads(text)
    return text


def sqrt_astar_scaled(a_list, a_star: float) -> tuple[float, ...]:
    return tuple(float(a) * float(np.sqrt(a_star)) for a in a_list)
