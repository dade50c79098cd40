"""Experiment configuration: a YAML file layered over the built-in ``default`` preset."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .classical import EnsembleConfig
from .grids import CM_RELATIVE, Grid1D, Grid2D
from .model import DEFAULT_PRESET, WELL_WIDTHS, ModelParams

EXPERIMENTS = ("validate", "sweep", "traces", "zeff", "classical", "compare")

PRESETS = {
    "default": {
        "params": dict(DEFAULT_PRESET),
        "well_widths": dict(WELL_WIDTHS),
        "channels": [1, 2, 4],
        "alphas": [3.0, -3.0],
        "alpha_sweep": {"min": -4.0, "max": 4.0, "step": 0.25},
        "grid": {"R": [-130.0, 90.0, 2048], "rho": [-24.0, 24.0, 256]},
        "eigen_grid": [-150.0, 150.0, 2048],
        "propagation": {
            "dt": 0.02,
            "t_final": 150.0,
            "record_every": 0.5,
            "absorber_R": 15.0,
            "absorber_rho": 6.0,
            "absorber_power": 0.1,
            "include_absorbed": True,
        },
        "snapshot_times": [150.0],
        "ensemble": {"n_particles": 100000, "dt": 5e-3, "sigma_rho": 1.5, "window": 100.0, "bins": 512,
                     "record_every": 1.0},
        "zeff": {"R_min": -12.0, "R_max": 12.0, "n_R": 481, "grid": [-25.0, 25.0, 512]},
        "seed": 0,
    }
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class ExperimentConfig:
    experiment: str = "validate"
    preset: str = "default"
    settings: dict = field(default_factory=dict)
    output_dir: str = "out"
    workers: int = 1

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw or {})
        preset = raw.pop("preset", "default")
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; available: {sorted(PRESETS)}")
        experiment = raw.pop("experiment", "validate")
        output_dir = raw.pop("output_dir", "out")
        workers = raw.pop("workers", 1)
        unknown = set(raw) - set(PRESETS[preset])
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "well_widths" in raw:
            raw["well_widths"] = {int(k): v for k, v in raw["well_widths"].items()}
        cfg = cls(experiment, preset, _merge(PRESETS[preset], raw), str(output_dir), int(workers))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError:
            raise
        try:
            raw = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a mapping")
        return cls.from_dict(raw)

    def __getitem__(self, key):
        return self.settings[key]

    def validate(self):
        s = self.settings
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            for n in s["channels"]:
                self.model(n, 0.0)
            self.grid()
            Grid1D(*s["eigen_grid"])
            EnsembleConfig(**{k: v for k, v in s["ensemble"].items() if k != "record_every"}, seed=int(s["seed"]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if not self.alpha_values().size:
            raise ConfigError("alpha sweep is empty")
        prop = s["propagation"]
        if not (prop["dt"] > 0 and prop["t_final"] > 0):
            raise ConfigError("dt and t_final must be positive")
        if prop["record_every"] <= 0:
            raise ConfigError("record_every must be positive")
        steps = prop["record_every"] / prop["dt"]
        if not math.isclose(steps, round(steps), rel_tol=1e-9):
            raise ConfigError("record_every must be a multiple of dt")
        g = self.grid()
        for axis, name in ((g.axis0, "R"), (g.axis1, "rho")):
            if not axis.is_pow2:
                raise ConfigError(f"{name} point count must be a power of two")
        for t in s["snapshot_times"]:
            if not 0 < t <= prop["t_final"]:
                raise ConfigError(f"snapshot time {t} outside (0, t_final]")
        if int(s["seed"]) < 0 or int(s["seed"]) >= 2 ** 64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")

    def model(self, n_channels: int, alpha: float) -> ModelParams:
        s = self.settings
        if n_channels not in s["well_widths"]:
            raise ConfigError(f"no well width for N={n_channels}")
        return ModelParams(alpha=float(alpha), n_channels=int(n_channels),
                           well_width=float(s["well_widths"][n_channels]), **s["params"])

    def grid(self) -> Grid2D:
        g = self.settings["grid"]
        return Grid2D(Grid1D(*g["R"]), Grid1D(*g["rho"]), CM_RELATIVE)

    def eigen_grid(self) -> Grid1D:
        return Grid1D(*self.settings["eigen_grid"])

    def ensemble_config(self, seed: int | None = None) -> EnsembleConfig:
        e = {k: v for k, v in self.settings["ensemble"].items() if k != "record_every"}
        return EnsembleConfig(**e, seed=int(self.settings["seed"] if seed is None else seed))

    def alpha_values(self) -> np.ndarray:
        sw = self.settings["alpha_sweep"]
        if sw["step"] <= 0 or sw["max"] < sw["min"]:
            return np.array([])
        n = int(math.floor((sw["max"] - sw["min"]) / sw["step"] + 1e-9)) + 1
        return np.round(sw["min"] + sw["step"] * np.arange(n), 12)

    def canonical(self) -> dict:
        """Everything that determines results (not output location or worker count)."""
        return {"experiment": self.experiment, "preset": self.preset, "settings": self.settings}

    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_seed(self, seed: int) -> "ExperimentConfig":
        out = copy.deepcopy(self)
        out.settings["seed"] = int(seed)
        out.validate()
        return out
