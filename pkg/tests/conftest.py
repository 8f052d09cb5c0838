import numpy as np
import pytest

from sawguide.dispersion import Layer, LayerStack, solve_modes
from sawguide.materials import load_database

WAVELENGTH = 1.6e-6


@pytest.fixture(scope="session")
def db():
    return load_database()


@pytest.fixture(scope="session")
def sic(db):
    return db["4H-SiC"]


@pytest.fixture(scope="session")
def alscn(db):
    return db["AlScN-42"]


@pytest.fixture(scope="session")
def film_stack(sic, alscn):
    return LayerStack([Layer(alscn, 1e-6)], sic)


@pytest.fixture(scope="session")
def film_modes(film_stack):
    return solve_modes(film_stack, WAVELENGTH)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
