import pytest

from thermoforecast.thermal import DisturbanceConfig, RelayConfig, ThermalModel, generate_disturbances, simulate

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def week_trace():
    d = generate_disturbances(DisturbanceConfig(), 42, 7 * 86400, 1.0)
    return simulate(ThermalModel(), RelayConfig(), d, 1.0)


@pytest.fixture(scope="session")
def acceptance_report():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
