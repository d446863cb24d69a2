import math

import numpy as np
import pytest

from noonsim.construction import ChainConfig, chain_head
from noonsim.experiment import default_model


@pytest.fixture(scope="session")
def head():
    return chain_head(ChainConfig())


@pytest.fixture(scope="session")
def model():
    return default_model()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def phi_grid():
    return np.arange(60) * (2 * math.pi / 60)


def random_contraction(rng, dim, unitary=True):
    """Haar-ish unitary via QR, optionally scaled into a contraction."""
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    if unitary:
        return q
    return q @ np.diag(rng.uniform(0.2, 1.0, size=dim))


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
