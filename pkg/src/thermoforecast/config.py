"""JSON run configuration with strict key checking.

Example (every key optional)::

    {
      "sim": {"setpoint": 21, "tolerance": 1, "on_power": 4000, "ramp_rate": 100,
              "dt": 1, "duration": 604800, "avg_window": 100,
              "x0": [21, 21, 21, 21],
              "disturbances": {"t_ext_mean": -6, "t_ext_amplitude": 3}},
      "train": {"epochs": 250, "learning_rate": 0.005, "hidden_size": 200},
      "forecast": {"mode": "closed_loop", "horizon": null},
      "synth": {"daily_amplitude": 0.3, "noise_sd": 0.01},
      "io": {"seed": 42}
    }
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .dataio import SynthLoadConfig
from .errors import ConfigError, DomainError
from .lstm import TrainingConfig
from .thermal import DisturbanceConfig, RelayConfig, ThermalModel


@dataclass(frozen=True)
class SimSection:
    setpoint: float = 21.0
    tolerance: float = 1.0
    on_power: float = 4000.0
    ramp_rate: float = 100.0
    dt: float = 1.0
    duration: float = 7 * 86400.0
    avg_window: float = 100.0
    x0: tuple = (21.0, 21.0, 21.0, 21.0)
    disturbances: DisturbanceConfig = field(default_factory=DisturbanceConfig)

    def relay(self) -> RelayConfig:
        return RelayConfig(self.setpoint, self.tolerance, self.on_power, self.ramp_rate)

    def model(self) -> ThermalModel:
        return ThermalModel(x0=list(self.x0))


@dataclass(frozen=True)
class ForecastSection:
    mode: str = "closed_loop"
    horizon: Optional[int] = None

    def __post_init__(self):
        if self.mode not in ("closed_loop", "one_step"):
            raise ConfigError(f"forecast.mode must be 'closed_loop' or 'one_step', got {self.mode!r}")


@dataclass(frozen=True)
class IoSection:
    seed: int = 42


@dataclass(frozen=True)
class RunConfig:
    sim: SimSection = field(default_factory=SimSection)
    train: TrainingConfig = field(default_factory=TrainingConfig)
    forecast: ForecastSection = field(default_factory=ForecastSection)
    synth: SynthLoadConfig = field(default_factory=SynthLoadConfig)
    io: IoSection = field(default_factory=IoSection)

    def training(self) -> TrainingConfig:
        """Training config with the run seed applied."""
        return dataclasses.replace(self.train, seed=self.io.seed)


_NESTED = {
    (SimSection, "disturbances"): DisturbanceConfig,
    (RunConfig, "sim"): SimSection,
    (RunConfig, "train"): TrainingConfig,
    (RunConfig, "forecast"): ForecastSection,
    (RunConfig, "synth"): SynthLoadConfig,
    (RunConfig, "io"): IoSection,
}


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    if cls is TrainingConfig and "seed" in data:
        raise ConfigError(f"{where}: the training seed is set by io.seed")
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        sub = _NESTED.get((cls, key))
        if sub is not None:
            value = _build(sub, value, f"{where}.{key}")
        elif key == "x0":
            value = tuple(float(v) for v in value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (DomainError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data, "config")


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    try:
        return config_from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def config_to_dict(cfg: RunConfig) -> dict:
    """Inverse of :func:`config_from_dict`; the training seed lives under ``io``."""
    data = dataclasses.asdict(cfg)
    data["train"].pop("seed")
    data["sim"]["x0"] = list(data["sim"]["x0"])
    return data
