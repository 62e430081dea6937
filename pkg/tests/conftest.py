import math

import numpy as np
import pytest
from hypothesis import settings

from porostab.cases import build_cantilever
from porostab.materials import RegionMaterial

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def cantilever():
    return build_cantilever()


@pytest.fixture
def rock():
    """Incompressible constituents, zero permeability."""
    return RegionMaterial(K_dr=5e9, nu=0.25, phi0=0.05, kappa=0.0)


@pytest.fixture
def drained_rock():
    return RegionMaterial(K_dr=5e9, nu=0.25, phi0=0.2, kappa=1e-13, K_s=40e9, K_f=2e9)


def rel(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = max(np.linalg.norm(b), 1e-300)
    return np.linalg.norm(a - b) / scale


INF = math.inf


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        terminalreporter.write_line(ACCEPTANCE[key])
