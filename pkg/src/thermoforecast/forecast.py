"""Standardization, closed-loop and one-step-ahead forecasting, RMSE."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import ConstantSeriesError, DomainError, ShapeError
from .lstm import LstmNetwork, LstmState, TrainingConfig, _cell, _gate_coefficients, network_forward, train

Mode = Literal["closed_loop", "one_step"]


def standardize(series) -> tuple[np.ndarray, float, float]:
    x = np.asarray(series, dtype=float).ravel()
    if len(x) < 2:
        raise DomainError(f"need at least 2 samples to standardize, got {len(x)}")
    mu = float(np.mean(x))
    sigma = float(np.std(x, ddof=1))
    if not sigma > 0:
        raise ConstantSeriesError("series is constant (sample standard deviation is 0)")
    return (x - mu) / sigma, mu, sigma


def destandardize(z, mu: float, sigma: float) -> np.ndarray:
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    return np.asarray(z, dtype=float) * sigma + mu


def rmse(preds, obs) -> float:
    p = np.asarray(preds, dtype=float).ravel()
    o = np.asarray(obs, dtype=float).ravel()
    if len(p) != len(o):
        raise ShapeError(f"length mismatch: {len(p)} predictions vs {len(o)} observations")
    if len(p) == 0:
        raise ShapeError("cannot compute RMSE of empty arrays")
    return math.sqrt(float(np.mean((p - o) ** 2)))


@dataclass
class ForecastResult:
    mode: Mode
    step: float
    predictions: np.ndarray
    observations: np.ndarray
    rmse: float

    @classmethod
    def build(cls, mode: Mode, step: float, predictions, observations) -> "ForecastResult":
        p = np.asarray(predictions, dtype=float)
        o = np.asarray(observations, dtype=float)
        return cls(mode, step, p, o, rmse(p, o))

    def summary(self) -> dict:
        return {"mode": self.mode, "steps": len(self.predictions), "rmse": self.rmse}


class _Stepper:
    """Advances the LSTM one standardized input at a time after a warm-up pass."""

    def __init__(self, net: LstmNetwork, z_history):
        z = np.asarray(z_history, dtype=float).ravel()
        if len(z) == 0:
            raise ShapeError("history must be non-empty")
        if net.input_size != 1 or net.output_size != 1:
            raise ShapeError("forecasting requires a univariate network (I = O = 1)")
        self.net = net
        self._coeffs = _gate_coefficients(net.hidden_size)
        outputs, cache = network_forward(net, z, LstmState.zeros(net.hidden_size))
        state = cache.final_state()
        self.h, self.c = state.h, state.c
        self.next_z = float(outputs[-1, 0])

    def observe(self, z: float) -> None:
        lstm, dense = self.net.lstm, self.net.dense
        _, self.h, self.c = _cell(lstm.W @ np.array([z]) + lstm.b, lstm.R, self._coeffs,
                                  self.h, self.c, lstm.hidden_size)
        self.next_z = float(dense.W[0] @ self.h + dense.b[0])


def _to_z(net: LstmNetwork, values) -> np.ndarray:
    return (np.asarray(values, dtype=float).ravel() - net.mu) / net.sigma


def forecast_closed_loop_z(net: LstmNetwork, z_history, horizon: int) -> np.ndarray:
    """Closed-loop forecast in standardized units.

    The value fed back is the prediction mapped to original units and
    standardized again, i.e. exactly what the one-step path would receive if the
    prediction had been observed.
    """
    if horizon < 0:
        raise DomainError(f"horizon must be non-negative, got {horizon}")
    stepper = _Stepper(net, z_history)
    preds = np.empty(horizon)
    for k in range(horizon):
        preds[k] = stepper.next_z
        stepper.observe(float(_to_z(net, destandardize(preds[k], net.mu, net.sigma))[0]))
    return preds


def forecast_one_step_z(net: LstmNetwork, z_history, z_observations) -> np.ndarray:
    """One-step-ahead forecast in standardized units, advancing on observed values."""
    obs = np.asarray(z_observations, dtype=float).ravel()
    if len(obs) == 0:
        raise ShapeError("observations must be non-empty")
    stepper = _Stepper(net, z_history)
    preds = np.empty(len(obs))
    for k, z in enumerate(obs):
        preds[k] = stepper.next_z
        stepper.observe(float(z))
    return preds


def forecast_closed_loop(net: LstmNetwork, history, horizon: int) -> np.ndarray:
    """Warm the state on ``history``, then feed each prediction back as the next input."""
    z = forecast_closed_loop_z(net, _to_z(net, history), horizon)
    return destandardize(z, net.mu, net.sigma)


def forecast_one_step(net: LstmNetwork, history, observations) -> np.ndarray:
    """Predict each observation from the state advanced on all earlier observed values."""
    z = forecast_one_step_z(net, _to_z(net, history), _to_z(net, observations))
    return destandardize(z, net.mu, net.sigma)


def fit(train_series, cfg: TrainingConfig, callback=None) -> tuple[LstmNetwork, list[float]]:
    """Standardize the training series, train, and attach the statistics to the network."""
    z, mu, sigma = standardize(train_series)
    net, history = train(z, cfg, callback=callback)
    net.mu, net.sigma = mu, sigma
    return net, history


def evaluate(net: LstmNetwork, history, observations, mode: Mode, step: float = 1.0) -> ForecastResult:
    obs = np.asarray(observations, dtype=float).ravel()
    if mode == "closed_loop":
        preds = forecast_closed_loop(net, history, len(obs))
    elif mode == "one_step":
        preds = forecast_one_step(net, history, obs)
    else:
        raise DomainError(f"unknown forecast mode {mode!r}")
    return ForecastResult.build(mode, step, preds, obs)
