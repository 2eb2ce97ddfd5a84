import numpy as np
import pytest

from risdip.channel import ChannelModel, ScenarioGeometry
from risdip.linalg import RngStream

# acceptance results collected by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)


@pytest.fixture
def small_geometry():
    return ScenarioGeometry(d_h=(52.0, 53.0), d_v=(2.0, 3.0), n_antennas=4,
                            n_elements=16, n_subsurfaces=4)


@pytest.fixture
def small_model(small_geometry):
    return ChannelModel(small_geometry, taps=(2, 1, 1))


@pytest.fixture
def rng():
    return RngStream(1234, 0)


def random_psd(n, rank, seed):
    g = np.random.default_rng(seed)
    A = g.standard_normal((n, rank)) + 1j * g.standard_normal((n, rank))
    return A @ A.conj().T
