"""Relay-controlled residential heater on a four-state linear thermal model.

States are (floor, internal facade, external facade, indoor) temperatures in
degrees Celsius. The model is integrated with forward Euler; at dt = 1 s this
is well inside the stability limit set by the fastest mode (~ -4.6e-3 /s).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

_A = 1e-3 * np.array(
    [
        [-0.020, 0.0, 0.0, 0.020],
        [0.0, -0.020, 0.001, 0.020],
        [0.0, 0.001, -0.056, 0.0],
        [1.234, 2.987, 0.0, -4.548],
    ]
)
_B = 1e-3 * np.array([[0.0], [0.0], [0.0], [0.003]])
_E = 1e-3 * np.array(
    [
        [0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0],
        [0.055, 0.0, 0.0],
        [0.327, 0.003, 0.001],
    ]
)
_C = np.array([[0.0, 0.0, 0.0, 1.0]])


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ThermalModel:
    """Continuous-time model ``dx/dt = A x + B u + E d``, ``T = C x``."""

    A: np.ndarray = field(default_factory=lambda: _A.copy())
    B: np.ndarray = field(default_factory=lambda: _B.copy())
    E: np.ndarray = field(default_factory=lambda: _E.copy())
    C: np.ndarray = field(default_factory=lambda: _C.copy())
    x0: np.ndarray = field(default_factory=lambda: np.full(4, 21.0))

    def __post_init__(self):
        shapes = {"A": (4, 4), "B": (4, 1), "E": (4, 3), "C": (1, 4), "x0": (4,)}
        for name, shape in shapes.items():
            arr = _frozen(getattr(self, name))
            if name == "B" and arr.shape == (4,):
                arr = _frozen(arr.reshape(4, 1))
            if arr.shape != shape:
                raise DomainError(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} contains non-finite entries")
            object.__setattr__(self, name, arr)
        if not np.array_equal(self.C, _C):
            raise DomainError("C must select the indoor temperature: [0, 0, 0, 1]")
        if not np.all(np.diag(self.A) < 0):
            raise DomainError("diagonal of A must be strictly negative")

    def output(self, x) -> float:
        return float(self.C[0] @ x)

    def steady_state(self, u: float, d) -> np.ndarray:
        """Equilibrium state for constant heater power and disturbance."""
        forcing = self.B[:, 0] * u + self.E @ np.asarray(d, dtype=float)
        return np.linalg.solve(self.A, -forcing)


@dataclass(frozen=True)
class DisturbanceSample:
    t_ext: float
    q_other: float
    solar: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.t_ext, self.q_other, self.solar)):
            raise DomainError(f"non-finite disturbance {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.t_ext, self.q_other, self.solar])


class RelayCommand(enum.IntEnum):
    OFF = 0
    ON = 1


@dataclass(frozen=True)
class RelayConfig:
    setpoint: float = 21.0
    tolerance: float = 1.0
    on_power: float = 4000.0
    ramp_rate: float = 100.0

    def __post_init__(self):
        for name in ("tolerance", "on_power", "ramp_rate"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive and finite, got {value}")
        if not math.isfinite(self.setpoint):
            raise DomainError("setpoint must be finite")

    def target_power(self, cmd: RelayCommand) -> float:
        return self.on_power if cmd == RelayCommand.ON else 0.0


def _disturbance_vector(d) -> np.ndarray:
    if isinstance(d, DisturbanceSample):
        return d.as_array()
    arr = np.asarray(d, dtype=float)
    if arr.shape != (3,):
        raise DomainError(f"disturbance must have 3 channels, got shape {arr.shape}")
    return arr


def derivative(model: ThermalModel, x, u: float, d) -> np.ndarray:
    """State derivative ``A x + B u + E d`` in degC/s."""
    x = np.asarray(x, dtype=float)
    dvec = _disturbance_vector(d)
    if x.shape != (4,):
        raise DomainError(f"state must be a 4-vector, got shape {x.shape}")
    if not (np.all(np.isfinite(x)) and math.isfinite(u) and np.all(np.isfinite(dvec))):
        raise DomainError("non-finite state, input or disturbance")
    return _rate(model, x, float(u), dvec)


def _rate(model, x, u, dvec):
    return model.A @ x + model.B[:, 0] * u + model.E @ dvec


def step_state(model: ThermalModel, x, u: float, d, dt: float) -> np.ndarray:
    if not (math.isfinite(dt) and dt > 0):
        raise DomainError(f"dt must be positive and finite, got {dt}")
    x = np.asarray(x, dtype=float)
    return x + dt * derivative(model, x, u, d)


def relay_command(T: float, cfg: RelayConfig, prev: RelayCommand) -> RelayCommand:
    """Heating hysteresis: ON below the band, OFF above it, hold inside (inclusive)."""
    if not math.isfinite(T):
        raise DomainError(f"non-finite temperature {T}")
    if T < cfg.setpoint - cfg.tolerance:
        return RelayCommand.ON
    if T > cfg.setpoint + cfg.tolerance:
        return RelayCommand.OFF
    return RelayCommand(prev)


def heater_step(current: float, cmd: RelayCommand, cfg: RelayConfig, dt: float) -> float:
    """Slew the heater power toward the commanded target by at most ``ramp_rate * dt``."""
    target = cfg.target_power(cmd)
    max_delta = cfg.ramp_rate * dt
    if abs(target - current) <= max_delta:
        power = target
    elif target > current:
        power = current + max_delta
    else:
        power = current - max_delta
    return min(max(power, 0.0), cfg.on_power)


@dataclass(frozen=True)
class DisturbanceConfig:
    """Parameters of the synthetic winter disturbance generator.

    External temperature is a 24 h sinusoid peaking at ``t_ext_peak_hour`` plus
    noise drawn every ``noise_interval`` seconds, linearly interpolated and
    clipped to +/- 3 standard deviations. Internal gains are piecewise constant
    over ``occupancy_interval`` blocks, uniform in ``[q_min, q_max]``. Solar gain
    is a half-sine between ``sunrise_hour`` and ``sunset_hour``.
    """

    t_ext_mean: float = -6.0
    t_ext_amplitude: float = 3.0
    t_ext_peak_hour: float = 15.0
    t_ext_noise_sd: float = 0.5
    noise_interval: float = 3600.0
    q_min: float = 0.0
    q_max: float = 1000.0
    occupancy_interval: float = 3600.0
    solar_peak: float = 1000.0
    sunrise_hour: float = 8.0
    sunset_hour: float = 16.0

    def __post_init__(self):
        if self.t_ext_amplitude < 0 or self.t_ext_noise_sd < 0:
            raise DomainError("amplitude and noise_sd must be non-negative")
        if not 0 <= self.q_min <= self.q_max:
            raise DomainError("need 0 <= q_min <= q_max")
        if self.noise_interval <= 0 or self.occupancy_interval <= 0:
            raise DomainError("noise and occupancy intervals must be positive")
        if self.solar_peak < 0 or not 0 <= self.sunrise_hour < self.sunset_hour <= 24:
            raise DomainError("invalid solar configuration")

    def t_ext_bounds(self) -> tuple[float, float]:
        spread = self.t_ext_amplitude + 3.0 * self.t_ext_noise_sd
        return self.t_ext_mean - spread, self.t_ext_mean + spread


def _step_count(duration: float, dt: float) -> int:
    if not (math.isfinite(duration) and duration > 0 and math.isfinite(dt) and dt > 0):
        raise DomainError(f"duration and dt must be positive, got {duration}, {dt}")
    n = round(duration / dt)
    if not math.isclose(n * dt, duration, rel_tol=1e-9, abs_tol=0.0):
        raise DomainError(f"duration {duration} is not a multiple of dt {dt}")
    return n


def generate_disturbances(cfg: DisturbanceConfig, seed: int, duration: float, dt: float) -> np.ndarray:
    """Return an ``(n, 3)`` array of (t_ext, q_other, solar) samples."""
    n = _step_count(duration, dt)
    rng = np.random.default_rng(seed)
    t = np.arange(n) * dt
    hours = (t / 3600.0) % 24.0

    t_ext = cfg.t_ext_mean + cfg.t_ext_amplitude * np.cos(
        2 * np.pi * (hours - cfg.t_ext_peak_hour) / 24.0
    )
    knots = int(math.ceil(t[-1] / cfg.noise_interval)) + 2
    noise_knots = rng.standard_normal(knots)
    if cfg.t_ext_noise_sd > 0:
        noise = np.interp(t, np.arange(knots) * cfg.noise_interval, noise_knots)
        t_ext = t_ext + cfg.t_ext_noise_sd * np.clip(noise, -3.0, 3.0)

    blocks = int(t[-1] // cfg.occupancy_interval) + 1
    levels = rng.uniform(cfg.q_min, cfg.q_max, size=blocks)
    q_other = levels[(t // cfg.occupancy_interval).astype(int)]

    daylight = (hours >= cfg.sunrise_hour) & (hours <= cfg.sunset_hour)
    phase = (hours - cfg.sunrise_hour) / (cfg.sunset_hour - cfg.sunrise_hour)
    solar = np.where(daylight, cfg.solar_peak * np.sin(np.pi * np.clip(phase, 0, 1)), 0.0)
    solar = np.maximum(solar, 0.0)

    return np.column_stack([t_ext, q_other, solar])


@dataclass
class SimulationTrace:
    dt: float
    times: np.ndarray
    indoor_temp: np.ndarray
    heater_power: np.ndarray
    relay_cmd: np.ndarray  # 0/1 per RelayCommand
    disturbances: np.ndarray  # (n, 3)

    def __len__(self):
        return len(self.times)


def simulate(model: ThermalModel, cfg: RelayConfig, disturbances, dt: float) -> SimulationTrace:
    """Closed-loop run: measure T, update relay, slew heater, then integrate one step."""
    if not (math.isfinite(dt) and dt > 0):
        raise DomainError(f"dt must be positive and finite, got {dt}")
    dist = np.asarray(
        [d.as_array() for d in disturbances]
        if len(disturbances) and isinstance(disturbances[0], DisturbanceSample)
        else disturbances,
        dtype=float,
    )
    if dist.ndim != 2 or dist.shape[1] != 3 or len(dist) == 0:
        raise DomainError(f"disturbances must be a non-empty (n, 3) array, got {dist.shape}")
    if not np.all(np.isfinite(dist)):
        raise DomainError("non-finite disturbance samples")

    n = len(dist)
    temps = np.empty(n)
    power = np.empty(n)
    relay = np.empty(n, dtype=np.int8)
    forcing = dist @ model.E.T
    A = model.A
    b = model.B[:, 0]
    x = model.x0.copy()
    cmd = RelayCommand.OFF
    u = 0.0
    for k in range(n):
        T = float(x[3])
        cmd = relay_command(T, cfg, cmd)
        u = heater_step(u, cmd, cfg, dt)
        temps[k] = T
        power[k] = u
        relay[k] = cmd
        x = x + dt * (A @ x + b * u + forcing[k])
    if not np.all(np.isfinite(temps)):
        raise DomainError("state diverged during simulation")

    return SimulationTrace(
        dt=dt,
        times=np.arange(n) * dt,
        indoor_temp=temps,
        heater_power=power,
        relay_cmd=relay,
        disturbances=dist,
    )


def average_power(trace: SimulationTrace, window: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean heater power per non-overlapping window; returns (window start times, means)."""
    per_window = round(window / trace.dt)
    if per_window < 1 or not math.isclose(per_window * trace.dt, window, rel_tol=1e-9):
        raise DomainError(f"window {window} is not a multiple of dt {trace.dt}")
    n = len(trace.heater_power)
    if n % per_window:
        raise DomainError(f"trace length {n} is not a multiple of {per_window} samples")
    means = trace.heater_power.reshape(-1, per_window).mean(axis=1)
    return np.arange(len(means)) * window, means
