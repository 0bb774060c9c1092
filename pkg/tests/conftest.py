import numpy as np
import pytest

from ionaddress import fieldmodel as fm
from ionaddress import hyperfine as hf
from ionaddress.constants import MG25
from ionaddress.trapmodel import default_trap, make_layout


@pytest.fixture(scope="session")
def atom():
    return MG25


@pytest.fixture(scope="session")
def levels():
    b0 = hf.field_independent_point(MG25, hf.DOWN, hf.UP, (5e-3, 40e-3))
    return hf.diagonalize(MG25, b0)


@pytest.fixture(scope="session")
def bases():
    return fm.load_bases()


@pytest.fixture(scope="session")
def trap():
    return default_trap()


@pytest.fixture(scope="session")
def layout_b(trap):
    return make_layout(trap, "B")


def random_basis(rng, electrode_id, uniform_scale=1e-5, gradient_scale=30.0):
    u = (rng.normal(size=2) + 1j * rng.normal(size=2)) * uniform_scale
    a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
    g = np.array([[a, b], [b, -a]]) * gradient_scale
    return fm.ElectrodeBasisField(electrode_id, u, g)


def random_bases(rng, **kw):
    return [random_basis(rng, e, **kw) for e in fm.ELECTRODES]


def random_drive(rng):
    c = rng.normal(size=3) + 1j * rng.normal(size=3)
    return fm.DriveConfiguration(dict(zip(fm.ELECTRODES, c)))


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[k])
