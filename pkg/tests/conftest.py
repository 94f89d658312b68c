import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("varpol", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("varpol")


@pytest.fixture
def write_csv(tmp_path):
    def _write(text, name="prices.csv"):
        path = tmp_path / name
        path.write_text(text)
        return path

    return _write


@pytest.fixture(scope="session")
def sample_windows():
    from varpol.cli import bundled_sample
    from varpol.marketdata import compute_returns, load_prices, split_windows

    return split_windows(compute_returns(load_prices(bundled_sample())))


@pytest.fixture(scope="session")
def synthetic_kde():
    from varpol.fit import fit_kde

    # deterministic, mostly positive sample so the VaR level is above zero
    u = (np.arange(100) + 0.5) / 100
    from scipy.special import ndtri

    return fit_kde(0.02 + 0.01 * ndtri(u))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
