import numpy as np
import pytest

from battfdd import DEFAULT_MODES, BatteryParams, build_library


@pytest.fixture(scope="session")
def params():
    return BatteryParams()


@pytest.fixture(scope="session")
def library(params):
    return build_library(params, DEFAULT_MODES, n_samples=10_000, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
