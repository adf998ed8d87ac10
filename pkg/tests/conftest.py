import numpy as np
import pytest

from wildeuler.config import GridConfig, NoiseConfig, RunConfig, SchemeConfig
from wildeuler.torus import TorusGrid


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def grid16():
    return TorusGrid(2, 16)


@pytest.fixture(scope="session")
def tiny_config():
    """Cheap end-to-end config: res 16, 64 path steps, one short schedule."""
    return RunConfig(grid=GridConfig(N=2, res=16, T=1.0, dt=2.0 ** -6, stride=4),
                     noise=NoiseConfig(path_seeds=[0, 1]),
                     scheme=SchemeConfig(ns=[16, 24], seeds=[1, 2])).validate()


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Record one PASS/FAIL line per acceptance criterion; echoed in the terminal summary."""
    def log(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok
    return log


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
