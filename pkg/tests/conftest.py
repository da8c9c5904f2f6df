import numpy as np
import pytest

from qspde.initial import random_band_limited, random_qtensor, rng_for
from qspde.spectral import TorusGrid
from qspde.tensor import MaterialConstants


@pytest.fixture(scope="session")
def grid2():
    return TorusGrid(2, 32)


@pytest.fixture(scope="session")
def grid3():
    return TorusGrid(3, 16)


@pytest.fixture(scope="session")
def consts():
    return MaterialConstants()


@pytest.fixture
def rng():
    return rng_for(12345)


def random_tuple(grid, rng, kmax=4):
    """(f, Q', Q, u) with f positive, both Q fields in S_0^3."""
    f = 1.0 + 0.3 * random_band_limited(grid, rng, (), kmax) / 3.0
    Qp = random_qtensor(grid, rng, kmax)
    Q = random_qtensor(grid, rng, kmax)
    u = random_band_limited(grid, rng, (grid.dim,), kmax)
    return f, Qp, Q, u


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.abs(a - b).max() / max(np.abs(b).max(), 1e-300))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def record(number, title, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'}  criterion {number:>2} {title}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
