import sys

import pytest

from greenwalk.groups import free_group, free_product
from greenwalk.measures import TailFamily, nearest_neighbor, realize, srw


@pytest.fixture(scope="session")
def F2():
    return free_group(2)


@pytest.fixture(scope="session")
def Z2_3():
    return free_product(2, 2, 2)


@pytest.fixture(scope="session")
def srw_F2(F2):
    return srw(F2)


@pytest.fixture(scope="session")
def nn_F2(F2):
    return nearest_neighbor(F2, {"a": 0.4, "A": 0.4, "b": 0.1, "B": 0.1})


@pytest.fixture(scope="session")
def gauss_F2(F2):
    """Gaussian tails realized to 1e-40 (support radius 14), radial."""
    return realize(F2, TailFamily.gaussian(0.5), 1e-40)[0]


@pytest.fixture(scope="session")
def gauss_small_F2(F2):
    """Gaussian beta=1.5 realized at radius 2: 16 support elements, exact weights."""
    return realize(F2, TailFamily.gaussian(1.5), 1e-4, exact=True)[0]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
