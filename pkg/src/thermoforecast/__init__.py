"""Relay-controlled thermostatic load simulation and LSTM short-term load forecasting."""

from .errors import ConstantSeriesError, DomainError, SeriesFormatError, ShapeError
from .forecast import (
    ForecastResult,
    destandardize,
    forecast_closed_loop,
    forecast_one_step,
    rmse,
    standardize,
)
from .lstm import LstmNetwork, TrainingConfig, bptt_gradients, init_params, network_forward, train
from .thermal import (
    DisturbanceConfig,
    RelayCommand,
    RelayConfig,
    SimulationTrace,
    ThermalModel,
    average_power,
    generate_disturbances,
    simulate,
)

__version__ = "0.1.0"
