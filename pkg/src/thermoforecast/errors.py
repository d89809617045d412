"""Exception hierarchy shared across the package."""


class ThermoForecastError(Exception):
    pass


class DomainError(ThermoForecastError, ValueError):
    """Non-finite or out-of-range numeric input."""


class ShapeError(ThermoForecastError, ValueError):
    pass


class ConstantSeriesError(ThermoForecastError, ValueError):
    """Series has zero sample standard deviation and cannot be standardized."""


class SeriesFormatError(ThermoForecastError, ValueError):
    """Malformed series CSV. ``row`` is the 1-based data row (header excluded)."""

    def __init__(self, message, path=None, row=None):
        self.path = path
        self.row = row
        prefix = f"{path}: " if path is not None else ""
        if row is not None:
            prefix += f"data row {row} (line {row + 1}): "
        super().__init__(prefix + message)


class MissingHeaderError(SeriesFormatError):
    pass


class SpacingError(SeriesFormatError):
    pass


class NonFiniteValueError(SeriesFormatError):
    pass


class ConfigError(ThermoForecastError, ValueError):
    pass
