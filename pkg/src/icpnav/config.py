"""Key-value run configuration files.

The format is INI with one section per parameter family.  Every knob the
suite honors is present in the default file with its standard value, so a
config written by ``save_config`` round-trips through ``load_config``
exactly and a hand-edited file only needs the keys it wants to change.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .suite import RunConfig

__all__ = ["default_config_text", "load_config", "save_config"]


def _opt_str(raw: str) -> str | None:
    return raw if raw else None


def _opt_float(raw: str) -> float | None:
    return float(raw) if raw else None


# (section, key, RunConfig field, parse)
_SCHEMA: tuple[tuple[str, str, str, object], ...] = (
    ("run", "method", "method", str),
    ("run", "humans", "n_humans", int),
    ("run", "cases", "cases", int),
    ("run", "seed", "seed", int),
    ("run", "workers", "workers", int),
    ("run", "out", "out_dir", _opt_str),
    ("run", "geometry", "geometry", str),
    ("run", "max_steps", "max_steps", int),
    ("physical", "dt", "dt", float),
    ("physical", "v_max", "v_max", float),
    ("physical", "r_r", "r_r", float),
    ("physical", "r_h", "r_h", float),
    ("horizons", "t_obs", "t_obs", int),
    ("horizons", "t_pred", "t_pred", int),
    ("horizons", "t_mpc", "t_mpc", int),
    ("planner", "omega_g", "omega_g", float),
    ("planner", "omega_v", "omega_v", float),
    ("planner", "omega_reg", "omega_reg", float),
    ("planner", "scp_tol", "scp_tol", float),
    ("planner", "scp_max_iter", "scp_max_iter", int),
    ("simulator", "neighbor_dist", "neighbor_dist", float),
    ("simulator", "max_neighbors", "max_neighbors", int),
    ("simulator", "time_horizon", "time_horizon", float),
    ("simulator", "goal_noise_prob", "goal_noise_prob", float),
    ("simulator", "goal_noise_mag", "goal_noise_mag", float),
    ("conformal", "ni", "ni", int),
    ("conformal", "cs", "cs", int),
    ("conformal", "alpha", "alpha", float),
    ("conformal", "exec_scheme", "exec_scheme", str),
    ("conformal", "tol_plan", "tol_plan", float),
    ("conformal", "tol_radii", "tol_radii", float),
    ("conformal", "quantile_rule", "quantile_rule", str),
    ("baselines", "offcp_episodes", "offcp_episodes", int),
    ("baselines", "acp_window", "acp_window", int),
    ("baselines", "acp_learning_rate", "acp_learning_rate", _opt_float),
)


def _render(value) -> str:
    if value is None:
        return ""
    return str(value)


def save_config(path: str | Path, cfg: RunConfig) -> None:
    parser = configparser.ConfigParser()
    for section, key, field, _parse in _SCHEMA:
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, _render(getattr(cfg, field)))
    with open(path, "w", encoding="utf-8") as f:
        parser.write(f)


def default_config_text() -> str:
    parser = configparser.ConfigParser()
    cfg = RunConfig()
    for section, key, field, _parse in _SCHEMA:
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, _render(getattr(cfg, field)))
    lines: list[str] = []
    for section in parser.sections():
        lines.append(f"[{section}]")
        for key, value in parser.items(section):
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)


def load_config(path: str | Path) -> RunConfig:
    """Read a config file; absent keys keep their defaults, unknown keys fail."""
    parser = configparser.ConfigParser()
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise FileNotFoundError(f"config file {path} not found")
    known = {(s, k) for s, k, _f, _p in _SCHEMA}
    for section in parser.sections():
        for key in parser[section]:
            if (section, key) not in known:
                raise ValueError(f"unknown config key [{section}] {key}")
    overrides = {}
    for section, key, field, parse in _SCHEMA:
        if parser.has_option(section, key):
            raw = parser.get(section, key).strip()
            overrides[field] = parse(raw)
    return RunConfig(**overrides)
