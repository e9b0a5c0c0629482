import numpy as np
import pytest

from nlsrom.dg import DgSpace
from nlsrom.diagnostics import PlaneWave, project_complex
from nlsrom.mesh import build_periodic_mesh
from nlsrom.sipg import OperatorSet

TWO_PI = 2 * np.pi


@pytest.fixture(scope="session")
def small_mesh():
    return build_periodic_mesh((0.0, TWO_PI, 0.0, TWO_PI), 4, 4)


@pytest.fixture(scope="session")
def small_space(small_mesh):
    return DgSpace(small_mesh)


@pytest.fixture(scope="session")
def small_ops(small_space):
    return OperatorSet(small_space, alpha=2.0, beta=2.0)


@pytest.fixture(scope="session")
def plane_wave_z0(small_space):
    pw = PlaneWave()
    return project_complex(small_space, lambda x, y: pw(0.0, x, y))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
