import os
import sys

import numpy as np
import pytest

from maskrefine import roomsim, signal

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture
def fixture_path():
    return lambda name: os.path.join(FIXTURES, name)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def scene():
    """One short simulated scenario shared by the slower tests."""
    scen = roomsim.sample_scenario(11, snr_db=0.0, duration_s=1.0)
    mix, h_s, h_n = roomsim.simulate(scen)
    Y, S, N = (signal.stft(w) for w in (mix.y, mix.s_img, mix.n_img))
    return {"scenario": scen, "mix": mix, "h_s": h_s, "h_n": h_n, "Y": Y, "S": S, "N": N}


def random_hpd(rng, M, n=None, cond_floor=1e-3):
    """Random Hermitian positive-definite matrices (n x M x M or M x M)."""
    shape = (M, M) if n is None else (n, M, M)
    a = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    h = a @ np.conj(np.swapaxes(a, -1, -2))
    return h + cond_floor * np.eye(M)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is not None and module.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(module.REPORT, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
