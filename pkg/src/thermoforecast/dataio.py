"""Series CSV I/O, train/test splitting and the synthetic hourly load generator."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DomainError,
    MissingHeaderError,
    NonFiniteValueError,
    SeriesFormatError,
    ShapeError,
    SpacingError,
)

SERIES_HEADER = ("t", "value")
TRACE_HEADER = ("t", "indoor_temp", "heater_power", "relay", "t_ext", "q_other", "solar")
FORECAST_HEADER = ("t", "prediction", "observation")


@dataclass
class TimeSeries:
    step: float
    start: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if not (math.isfinite(self.step) and self.step > 0):
            raise DomainError(f"step must be positive, got {self.step}")
        if len(self.values) == 0:
            raise DomainError("series must be non-empty")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("series contains non-finite values")

    def __len__(self):
        return len(self.values)

    @property
    def times(self) -> np.ndarray:
        return self.start + np.arange(len(self.values)) * self.step

    def samples_per(self, seconds: float) -> int:
        n = round(seconds / self.step)
        if n < 1 or not math.isclose(n * self.step, seconds, rel_tol=1e-9):
            raise DomainError(f"{seconds} s is not a whole number of {self.step} s steps")
        return n


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    # repr is the shortest decimal that parses back to the identical double
    return repr(float(x))


def _open_for_write(path):
    path = Path(path)
    if path.is_dir():
        raise OSError(f"{path} is a directory, not a file")
    if not path.parent.exists():
        raise FileNotFoundError(f"directory {path.parent} does not exist (writing {path})")
    return path.open("w", newline="")


def write_table(path, header, columns) -> None:
    """Write equal-length columns as CSV; ``None`` cells are left empty."""
    with _open_for_write(path) as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join("" if v is None else _fmt(v) for v in row) + "\n")


def write_series_csv(series: TimeSeries, path) -> None:
    write_table(path, SERIES_HEADER, [series.times, series.values])


def read_table(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise MissingHeaderError("file is empty", path=path)
    return [h.strip() for h in rows[0]], rows[1:]


def read_column(path, names) -> np.ndarray:
    """Read the first column whose header is in ``names`` as floats; empty cells are NaN."""
    header, rows = read_table(path)
    for name in names:
        if name in header:
            col = header.index(name)
            break
    else:
        raise MissingHeaderError(f"none of the columns {list(names)} found in header {header}", path=path)
    out = np.empty(len(rows))
    for k, row in enumerate(rows, start=1):
        try:
            cell = row[col].strip()
            out[k - 1] = float(cell) if cell else math.nan
        except (IndexError, ValueError) as exc:
            raise SeriesFormatError(f"cannot parse {name!r}: {exc}", path=path, row=k) from exc
    return out


def read_series_csv(path) -> TimeSeries:
    header, rows = read_table(path)
    if tuple(header) != SERIES_HEADER:
        raise MissingHeaderError(f"expected header 't,value', got {','.join(header)!r}", path=path)
    if not rows:
        raise SeriesFormatError("no data rows", path=path)
    t = np.empty(len(rows))
    v = np.empty(len(rows))
    for k, row in enumerate(rows, start=1):
        if len(row) != 2:
            raise SeriesFormatError(f"expected 2 fields, got {len(row)}", path=path, row=k)
        try:
            t[k - 1], v[k - 1] = float(row[0]), float(row[1])
        except ValueError as exc:
            raise SeriesFormatError(str(exc), path=path, row=k) from exc
        if not (math.isfinite(t[k - 1]) and math.isfinite(v[k - 1])):
            raise NonFiniteValueError("non-finite time or value", path=path, row=k)
    if len(rows) == 1:
        raise SeriesFormatError("need at least two rows to infer the step", path=path)
    step = t[1] - t[0]
    if not step > 0:
        raise SpacingError("time must be strictly increasing", path=path, row=2)
    for k in range(2, len(t)):
        if abs((t[k] - t[k - 1]) - step) > 1e-6 * step:
            raise SpacingError(
                f"spacing {t[k] - t[k - 1]!r} differs from {step!r}", path=path, row=k + 1
            )
    return TimeSeries(step=float(step), start=float(t[0]), values=v)


def split_series(series: TimeSeries, train_count: int, test_count: int) -> tuple[TimeSeries, TimeSeries]:
    n = len(series)
    if train_count < 1 or test_count < 1 or train_count + test_count != n:
        raise ShapeError(
            f"split {train_count} + {test_count} does not partition a series of length {n}"
        )
    train = TimeSeries(series.step, series.start, series.values[:train_count].copy())
    test = TimeSeries(series.step, series.start + train_count * series.step,
                      series.values[train_count:].copy())
    return train, test


def split_by_duration(series: TimeSeries, train_seconds: float) -> tuple[TimeSeries, TimeSeries]:
    n_train = series.samples_per(train_seconds)
    return split_series(series, n_train, len(series) - n_train)


def concatenate_series(first: TimeSeries, second: TimeSeries) -> TimeSeries:
    if first.step != second.step or not math.isclose(
        second.start, first.start + len(first) * first.step, rel_tol=1e-12, abs_tol=1e-9
    ):
        raise ShapeError("series are not contiguous on a common time axis")
    return TimeSeries(first.step, first.start, np.concatenate([first.values, second.values]))


@dataclass(frozen=True)
class SynthLoadConfig:
    """Hourly aggregate residential load: ``base + daily + weekly + noise``.

    The daily profile is a fundamental plus an optional second harmonic (two
    peaks a day); the weekly term is a 168 h sinusoid.
    """

    base: float = 1.0
    daily_amplitude: float = 0.3
    daily_peak_hour: float = 19.0
    second_harmonic: float = 0.1
    weekly_amplitude: float = 0.05
    noise_sd: float = 0.01


def synth_load_series(cfg: SynthLoadConfig, seed: int, days: int) -> TimeSeries:
    if days < 1:
        raise DomainError(f"days must be >= 1, got {days}")
    rng = np.random.default_rng(seed)
    hours = np.arange(24 * days, dtype=float)
    daily_phase = 2 * np.pi * (hours - cfg.daily_peak_hour) / 24.0
    values = (
        cfg.base
        + cfg.daily_amplitude * np.cos(daily_phase)
        + cfg.second_harmonic * np.cos(2 * daily_phase)
        + cfg.weekly_amplitude * np.sin(2 * np.pi * hours / 168.0)
    )
    noise = rng.standard_normal(len(hours))
    if cfg.noise_sd > 0:
        values = values + cfg.noise_sd * noise
    return TimeSeries(step=3600.0, start=0.0, values=values)


def write_trace_csv(trace, path) -> None:
    d = trace.disturbances
    write_table(path, TRACE_HEADER, [
        trace.times, trace.indoor_temp, trace.heater_power,
        trace.relay_cmd, d[:, 0], d[:, 1], d[:, 2],
    ])
