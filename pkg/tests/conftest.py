import numpy as np
import pytest

from isp.mesh import build_interval_mesh, build_unit_square_mesh


@pytest.fixture(scope="session")
def mesh1d():
    return build_interval_mesh(200)


@pytest.fixture(scope="session")
def mesh2d():
    return build_unit_square_mesh(40, 40)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
