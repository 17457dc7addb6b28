import time

import numpy as np
import pytest

from cbflearn import (
    ClassKFunction,
    PDGains,
    PitchEllipseBarrier,
    SegwayParams,
    load_config,
    run_campaign,
    shipped_config_path,
)


@pytest.fixture
def nom():
    return SegwayParams()


@pytest.fixture
def bf():
    return PitchEllipseBarrier(theta_max=0.3, theta_e=0.0, c=0.1)


@pytest.fixture
def alpha():
    return ClassKFunction(1.0)


@pytest.fixture
def gains():
    return PDGains(150.0, 35.0, 0.2, 3.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def default_config():
    return load_config(shipped_config_path("default"))


@pytest.fixture(scope="session")
def default_campaign(default_config, tmp_path_factory):
    """The shipped default campaign, run once per session."""
    out = tmp_path_factory.mktemp("campaign_a")
    t0 = time.perf_counter()
    result = run_campaign(default_config, out)
    result.elapsed = time.perf_counter() - t0
    return result


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
