import numpy as np
import pytest

from dynlap import assemble_system, delaunay_triangulate, solve_system
from dynlap.mesh import grid_points
from dynlap.pipeline import builtin_ensemble

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: (int(s.split()[1].rstrip(":abc")), s)):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def gyre_ensemble():
    field, ens = builtin_ensemble("double_gyre", 50, 11)
    return field, ens


@pytest.fixture(scope="session")
def gyre_neumann(gyre_ensemble):
    _, ens = gyre_ensemble
    system = assemble_system(ens, "neumann")
    return system, solve_system(system, 3)


@pytest.fixture(scope="session")
def square_mesh():
    return delaunay_triangulate(grid_points(21))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
