"""YAML configuration mapping onto the domain types.

Quantities naturally quoted in dB or dBm carry a _db/_dbm suffix in the
file and are converted to linear units at load time; everything else maps
one-to-one onto SystemParams / SolverConfig / ChannelModelConfig fields.
Unknown or missing keys are reported by their dotted path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from .channel import ChannelModelConfig, validate_channel_config
from .model import (SolverConfig, SystemParams, db_to_linear, dbm_to_watts,
                    validate_params, validate_solver_config)


class ConfigError(ValueError):
    """Configuration file problem, named by dotted field path."""


@dataclass
class RunConfig:
    seeds: list = field(default_factory=lambda: [0])
    nu_step: float = 0.05
    modes: list = field(default_factory=lambda: ["fdfd"])
    moops: list = field(default_factory=lambda: ["rate"])
    workers: int = 1


@dataclass
class ExperimentConfig:
    params: SystemParams
    solver: SolverConfig
    channel: ChannelModelConfig
    run: RunConfig


_SYSTEM_KEYS = {
    "num_users": ("num_users", int),
    "num_subcarriers": ("num_subcarriers", int),
    "delta_bs_db": ("delta_bs", db_to_linear),
    "delta_ue_db": ("delta_ue", db_to_linear),
    "noise_power_dbm": ("noise_power", dbm_to_watts),
    "p_bs_max_dbm": ("p_bs_max", dbm_to_watts),
    "p_user_max_dbm": ("p_user_max", dbm_to_watts),
    "kappa": ("kappa", float),
    "theta": ("theta", float),
    "pc_bs_dbm": ("pc_bs", dbm_to_watts),
    "pc_ue_dbm": ("pc_ue", dbm_to_watts),
    "r_min_dl": ("r_min_dl", float),
    "r_min_ul": ("r_min_ul", float),
    "subcarrier_bandwidth_hz": ("subcarrier_bandwidth", float),
    "penalty_lambda": ("penalty_lambda", float),
    "cell_radius_m": ("cell_radius", float),
}
_SYSTEM_REQUIRED = [k for k in _SYSTEM_KEYS if k != "penalty_lambda"]

_CHANNEL_KEYS = {
    "pathloss_ref_db": ("pathloss_ref_db", float),
    "pathloss_exponent": ("pathloss_exponent", float),
    "min_user_distance_m": ("min_user_distance", float),
    "fading": ("fading", str),
}

_SOLVER_KEYS = {
    "t_max": ("t_max", int),
    "mm_rel_tol": ("mm_rel_tol", float),
    "kkt_tol": ("kkt_tol", float),
    "barrier_mu0": ("barrier_mu0", float),
    "barrier_growth": ("barrier_growth", float),
    "binary_tol": ("binary_tol", float),
    "rng_seed": ("rng_seed", int),
    "lambda_ramp": ("lambda_ramp", bool),
    "penalty_saturation": ("penalty_saturation", float),
}

_RUN_KEYS = {"seeds", "nu_step", "modes", "moops", "workers"}


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name, {})
    if sec is None:
        sec = {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    return sec


def _convert(section: str, key: str, conv, value):
    try:
        return conv(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}.{key}: cannot convert {value!r}") from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    unknown_sections = set(raw) - {"system", "channel", "solver", "run"}
    if unknown_sections:
        raise ConfigError(f"unknown section(s): {sorted(unknown_sections)}")

    system = _section(raw, "system")
    missing = [k for k in _SYSTEM_REQUIRED if k not in system]
    if missing:
        raise ConfigError("missing required field(s): "
                          + ", ".join(f"system.{k}" for k in missing))
    unknown = set(system) - set(_SYSTEM_KEYS)
    if unknown:
        raise ConfigError(f"unknown field(s): "
                          + ", ".join(f"system.{k}" for k in sorted(unknown)))
    kwargs = {}
    for key, (attr, conv) in _SYSTEM_KEYS.items():
        if key in system:
            kwargs[attr] = _convert("system", key, conv, system[key])
    if "penalty_lambda" not in kwargs:
        kwargs["penalty_lambda"] = kwargs["p_bs_max"] / kwargs["noise_power"]
    params = validate_params(SystemParams(**kwargs))

    chan_sec = _section(raw, "channel")
    unknown = set(chan_sec) - set(_CHANNEL_KEYS)
    if unknown:
        raise ConfigError("unknown field(s): "
                          + ", ".join(f"channel.{k}" for k in sorted(unknown)))
    ckwargs = {attr: _convert("channel", key, conv, chan_sec[key])
               for key, (attr, conv) in _CHANNEL_KEYS.items() if key in chan_sec}
    channel = validate_channel_config(ChannelModelConfig(**ckwargs), params)

    solver_sec = _section(raw, "solver")
    unknown = set(solver_sec) - set(_SOLVER_KEYS)
    if unknown:
        raise ConfigError("unknown field(s): "
                          + ", ".join(f"solver.{k}" for k in sorted(unknown)))
    skwargs = {attr: _convert("solver", key, conv, solver_sec[key])
               for key, (attr, conv) in _SOLVER_KEYS.items() if key in solver_sec}
    solver = validate_solver_config(SolverConfig(**skwargs))

    run_sec = _section(raw, "run")
    unknown = set(run_sec) - _RUN_KEYS
    if unknown:
        raise ConfigError("unknown field(s): "
                          + ", ".join(f"run.{k}" for k in sorted(unknown)))
    run = RunConfig()
    if "seeds" in run_sec:
        seeds = run_sec["seeds"]
        if isinstance(seeds, int):
            seeds = list(range(seeds))
        run.seeds = [int(s) for s in seeds]
    if "nu_step" in run_sec:
        run.nu_step = float(run_sec["nu_step"])
    if "modes" in run_sec:
        run.modes = [str(m) for m in run_sec["modes"]]
    if "moops" in run_sec:
        run.moops = [str(m) for m in run_sec["moops"]]
    if "workers" in run_sec:
        run.workers = int(run_sec["workers"])
    return ExperimentConfig(params=params, solver=solver, channel=channel, run=run)
