"""Run-configuration loading, defaulting, and validation.

Configs are JSON with a versioned schema.  Every field has a default (an
empty file resolves to a desk-scale run) and every applied default is
recorded so manifests can echo the fully resolved tree.  Validation errors
carry the offending field path; material tables are additionally checked
against the boundedness assumptions with the offending omega node named.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

import numpy as np

from .grids import (
    DESK_DX_CAP,
    DESK_DX_RATIO,
    DESK_N_MU,
    DESK_N_OMEGA,
    PAPER_DX_CAP,
    PAPER_DX_RATIO,
    PAPER_N_MU,
    PAPER_N_OMEGA,
    PAPER_OMEGA_MAX,
    PAPER_OMEGA_MIN,
    PhaseSpaceGrid,
    build_grid,
)
from .materials import MaterialModel, MaterialValidationError, material_from_config
from .sources import ReflectionModel, SourceSpec, TestFunctionSpec

__all__ = ["ConfigError", "load_config", "resolve_config", "build_run_pieces",
            "grid_from_config", "eta_from_config", "source_from_config",
            "test_fn_from_config", "CONFIG_SCHEMA_VERSION"]

CONFIG_SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Configuration rejected; message carries the field path."""


_GRID_PRESETS = {
    "paper": dict(n_mu=PAPER_N_MU, n_omega=PAPER_N_OMEGA, omega_min=PAPER_OMEGA_MIN,
                  omega_max=PAPER_OMEGA_MAX, dx_cap=PAPER_DX_CAP, dx_ratio=PAPER_DX_RATIO),
    "desk": dict(n_mu=DESK_N_MU, n_omega=DESK_N_OMEGA, omega_min=0.2,
                 omega_max=2.0, dx_cap=DESK_DX_CAP, dx_ratio=DESK_DX_RATIO),
}

_DEFAULTS = {
    "schema_version": CONFIG_SCHEMA_VERSION,
    "epsilon": 1.0,
    "epsilon_list": None,
    "domain": {"x_max": 0.5},
    "grid": {
        "preset": "desk",
        "n_mu": None, "n_omega": None, "omega_min": None, "omega_max": None,
        "dx_cap": None, "dx_ratio": None,
        "dt_rule": "paper", "dt_safety": 1.0, "dt_override": None,
    },
    "material": {"kind": "power_law", "nu_coeff": 1.0, "nu_exp": 1.0,
                 "tau_coeff": 1.0, "tau_exp": -1.0,
                 "c_omega_coeff": 1.0, "c_omega_exp": 0.0},
    "eta": {"kind": "tanh", "a": 1.5, "b": 1.0},
    "eta2": None,
    "source": {"kind": "grid_delta", "mu0": 0.935, "omega_index": None, "omega0": None,
               "theta_t": 0.1, "theta_mu": 0.1, "theta_omega": 0.1,
               "sampling": "cell_mean", "amplitude": 1.0},
    "test_function": {"kind": "grid_delta", "theta": 0.1},
    "solver": {"collision": "bgk", "collision_mode": "explicit",
               "coupling_mode": "reflective_only", "backend": "auto",
               "substrate_length": 1.0, "substrate_nu_ratio": 0.5,
               "substrate_tau_ratio": 4.0, "balance_c": 1.0,
               "check_finite_every": 64},
    "time": {"margin": 1.5, "t_stop": None},
    "experiment": {
        "source_indices": [],
        "trace_stride": 1,
        "a_fixed": 1.5,
        "b_range": [0.5, 1.5],
        "n_points": 21,
        "truth": {"kind": "tanh", "a": 1.5, "b": 1.0},
        "initial": [1.4, 0.9],
        "lr": 8000.0,
        "max_iters": 60,
        "grad_tol": 1e-12,
        "fd_rel_step": 1e-3,
        "theta_list": [0.2, 0.1, 0.05],
        "theta_mu_ratio": 0.25,
        "theta_omega_ratio": 0.25,
        "theta_test_ratio": 1.0,
        "n_gl": 64,
        "noise_sigma": 0.0,
        "snapshot_times": [],
    },
}


# subtrees whose layout depends on a "kind" switch; replaced wholesale
_FREEFORM = {"eta", "eta2", "material", "experiment.truth"}


def _merge(defaults, user, path, applied):
    """Recursive dict merge recording which leaves fell back to defaults."""
    if user is None:
        if isinstance(defaults, dict):
            for key, val in defaults.items():
                _note_default(val, f"{path}.{key}" if path else key, applied)
        else:
            applied.append(path)
        return copy.deepcopy(defaults)
    if path in _FREEFORM:
        return copy.deepcopy(user)
    if isinstance(defaults, dict):
        if not isinstance(user, dict):
            raise ConfigError(f"{path or 'config'}: expected an object, got {type(user).__name__}")
        out = {}
        for key, dval in defaults.items():
            sub = f"{path}.{key}" if path else key
            if key in user:
                out[key] = _merge(dval, user[key], sub, applied) \
                    if isinstance(dval, dict) else copy.deepcopy(user[key])
            else:
                out[key] = copy.deepcopy(dval)
                _note_default(dval, sub, applied)
        for key in user:
            if key not in defaults:
                raise ConfigError(f"unknown config field: {f'{path}.{key}' if path else key}")
        return out
    return copy.deepcopy(user)


def _note_default(val, path, applied):
    if isinstance(val, dict):
        for key, sub in val.items():
            _note_default(sub, f"{path}.{key}", applied)
    else:
        applied.append(path)


def resolve_config(user_cfg: dict) -> tuple[dict, list]:
    """Merge a raw config dict over the defaults; returns (resolved, defaulted-paths)."""
    applied: list = []
    cfg = _merge(_DEFAULTS, user_cfg or {}, "", applied)
    if cfg["schema_version"] != CONFIG_SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version: expected {CONFIG_SCHEMA_VERSION}, got {cfg['schema_version']!r}"
        )
    _validate(cfg)
    return cfg, sorted(applied)


def load_config(path) -> tuple[dict, list]:
    """Read and resolve a JSON config file.

    Raises ConfigError on parse failure, unknown fields, bad values, or an
    Assumption-violating material table.
    """
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: not valid JSON ({exc})") from exc
    return resolve_config(raw)


def _validate(cfg: dict):
    eps_list = cfg["epsilon_list"]
    if eps_list is not None:
        if not isinstance(eps_list, (list, tuple)) or not eps_list:
            raise ConfigError("epsilon_list: must be a non-empty list of positive numbers")
        for k, e in enumerate(eps_list):
            if not (isinstance(e, (int, float)) and e > 0):
                raise ConfigError(f"epsilon_list[{k}]: must be positive, got {e!r}")
    if not (isinstance(cfg["epsilon"], (int, float)) and cfg["epsilon"] > 0):
        raise ConfigError(f"epsilon: must be positive, got {cfg['epsilon']!r}")
    if cfg["domain"]["x_max"] <= 0:
        raise ConfigError(f"domain.x_max: must be positive, got {cfg['domain']['x_max']!r}")
    g = cfg["grid"]
    if g["preset"] not in (None, "paper", "desk", "custom"):
        raise ConfigError(f"grid.preset: must be paper|desk|custom, got {g['preset']!r}")
    if g["dt_rule"] not in ("paper", "cfl"):
        raise ConfigError(f"grid.dt_rule: must be paper|cfl, got {g['dt_rule']!r}")
    if cfg["material"]["kind"] not in ("power_law", "table"):
        raise ConfigError(
            f"material.kind: must be power_law|table, got {cfg['material']['kind']!r}"
        )
    for name in ("eta", "eta2"):
        block = cfg[name]
        if block is None:
            continue
        if block.get("kind", "tanh") not in ("tanh", "table"):
            raise ConfigError(f"{name}.kind: must be tanh|table, got {block.get('kind')!r}")
    if cfg["source"]["kind"] not in ("grid_delta", "smooth"):
        raise ConfigError(f"source.kind: must be grid_delta|smooth, got {cfg['source']['kind']!r}")
    if cfg["test_function"]["kind"] not in ("grid_delta", "smooth"):
        raise ConfigError(
            f"test_function.kind: must be grid_delta|smooth, got {cfg['test_function']['kind']!r}"
        )
    exp = cfg["experiment"]
    if exp["n_points"] < 2:
        raise ConfigError(f"experiment.n_points: need >= 2 scan points, got {exp['n_points']!r}")
    if exp["noise_sigma"] < 0:
        raise ConfigError(f"experiment.noise_sigma: must be >= 0, got {exp['noise_sigma']!r}")


def grid_from_config(cfg: dict, epsilon: float, nu_max: float = 2.0) -> PhaseSpaceGrid:
    g = cfg["grid"]
    preset = g["preset"] or "custom"
    params = dict(_GRID_PRESETS.get(preset, _GRID_PRESETS["desk"]))
    if preset == "custom":
        params = dict(_GRID_PRESETS["desk"])
    for key in ("n_mu", "n_omega", "omega_min", "omega_max", "dx_cap", "dx_ratio"):
        if g[key] is not None:
            params[key] = g[key]
    return build_grid(
        epsilon,
        x_max=cfg["domain"]["x_max"],
        dt_rule=g["dt_rule"],
        dt_safety=g["dt_safety"],
        dt_override=g["dt_override"],
        nu_max=nu_max,
        **params,
    )


def material_for_grid(cfg: dict, grid: PhaseSpaceGrid) -> MaterialModel:
    try:
        return material_from_config(cfg["material"], grid.omega_nodes)
    except MaterialValidationError as exc:
        raise ConfigError(f"material: {exc}") from exc


def eta_from_config(block: dict) -> ReflectionModel:
    if block.get("kind", "tanh") == "tanh":
        return ReflectionModel(kind="tanh", a=float(block.get("a", 1.5)),
                               b=float(block.get("b", 1.0)))
    if "csv" in block and block["csv"]:
        from .materials import load_material_table

        om, vals = load_material_table(block["csv"])
        return ReflectionModel(kind="table", table_omega=om, table_eta=vals)
    return ReflectionModel(kind="table",
                           table_omega=np.asarray(block["omega"], dtype=np.float64),
                           table_eta=np.asarray(block["eta"], dtype=np.float64))


def source_from_config(cfg: dict) -> SourceSpec:
    s = cfg["source"]
    if s["kind"] == "grid_delta":
        return SourceSpec(kind="grid_delta", mu0=float(s["mu0"]),
                          omega_index=s["omega_index"], omega0=s["omega0"],
                          amplitude=float(s["amplitude"]))
    return SourceSpec(
        kind="smooth", mu0=float(s["mu0"]),
        omega0=float(s["omega0"]) if s["omega0"] is not None else 1.0,
        theta_t=float(s["theta_t"]), theta_mu=float(s["theta_mu"]),
        theta_omega=float(s["theta_omega"]), sampling=s["sampling"],
        amplitude=float(s["amplitude"]),
    )


def test_fn_from_config(cfg: dict) -> TestFunctionSpec:
    t = cfg["test_function"]
    if t["kind"] == "grid_delta":
        return TestFunctionSpec(kind="grid_delta")
    return TestFunctionSpec(kind="smooth", theta=float(t["theta"]))


def build_run_pieces(cfg: dict, epsilon: float):
    """Grid + material (validated) for one epsilon of a resolved config.

    The cfl time-step rule needs the material's velocity bound, which needs
    the omega nodes, so the grid is rebuilt once when that rule is active.
    """
    grid = grid_from_config(cfg, epsilon)
    material = material_for_grid(cfg, grid)
    if cfg["grid"]["dt_rule"] == "cfl" and cfg["grid"]["dt_override"] is None:
        grid = grid_from_config(cfg, epsilon, nu_max=material.nu_max)
    return grid, material
