import numpy as np
import pytest

from geoshell import shapes
from geoshell.energy import DiscreteShells, FlatQuadratic, SubdivisionFEM
from geoshell.mesh import Shell


def jitter(shell, amplitude, seed=0):
    rng = np.random.default_rng(seed)
    return Shell(shell.topology, shell.positions + amplitude * rng.normal(size=shell.positions.shape))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def flat():
    return FlatQuadratic()


@pytest.fixture(scope="session")
def shells_backend():
    return DiscreteShells()


@pytest.fixture(scope="session")
def fem_backend():
    return SubdivisionFEM()


@pytest.fixture(scope="session", params=["discreteShells", "subdivisionFem"])
def physical(request):
    return DiscreteShells() if request.param == "discreteShells" else SubdivisionFEM()


@pytest.fixture(scope="session")
def flat_pair():
    """Two unrelated 50-vertex shells on the same tube topology."""
    base = shapes.tube(n_around=6, n_rings=8)
    assert base.topology.n_vertices == 50
    return jitter(base, 0.3, seed=1), jitter(base, 0.3, seed=2)


@pytest.fixture(scope="session")
def bar_pair():
    return shapes.bent_bar(0.2), shapes.bent_bar(0.9)


# -- acceptance summary ------------------------------------------------------------

ACCEPTANCE = {}


def record(number, ok, detail):
    ACCEPTANCE[number] = (bool(ok), detail)
    print(f"acceptance {number}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
