import numpy as np
import pytest

from polaron_lab import froehlich, pekar, perturb
from polaron_lab.grid import Grid, default_grid


@pytest.fixture(scope="session")
def sech2():
    return pekar.Potential("sech2", 2.0, 1.0)


@pytest.fixture(scope="session")
def gauss_half():
    return perturb.TestMeasure("gaussian", 0.0, 0.5)


@pytest.fixture(scope="session")
def free_4097():
    return pekar.minimize(pekar.Potential("zero"), Grid(40.0, 4097))


@pytest.fixture(scope="session")
def sech2_base(sech2):
    # routed through perturb's cache so bracket tests reuse the solve
    return perturb._base(sech2, default_grid())


@pytest.fixture(scope="session")
def desk_cfg():
    return froehlich.FockConfig()


@pytest.fixture(scope="session")
def desk_ground(sech2, desk_cfg):
    H = froehlich.build_hamiltonian(1.0, sech2, desk_cfg)
    return H, froehlich.ground_state(H)
