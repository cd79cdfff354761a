import math

import numpy as np
import pytest

from discrete_riemann import cellular, critical, homology


@pytest.fixture(scope="session")
def torus11():
    return cellular.generate_square_torus(1, 1, math.pi / 4)


@pytest.fixture(scope="session")
def torus12():
    return cellular.generate_square_torus(1, 2, math.pi / 3)


@pytest.fixture(scope="session")
def torus23():
    return cellular.generate_square_torus(2, 3, 1.0)


@pytest.fixture(scope="session")
def trihex():
    return cellular.generate_trihex_torus(2, 2, [1 / math.sqrt(3)] * 3)


@pytest.fixture(scope="session")
def origami2():
    return cellular.generate_origami("1 2 3 4", "1 3")


@pytest.fixture(scope="session")
def hb_origami2(origami2):
    return homology.harmonic_basis(origami2)


@pytest.fixture(scope="session")
def patch4():
    return cellular.generate_rhombic_patch(1.0, "square", radius=4)


@pytest.fixture(scope="session")
def cm4(patch4):
    return critical.check_critical(patch4)


@pytest.fixture(scope="session")
def cm8():
    return critical.check_critical(cellular.generate_rhombic_patch(1.0, "square", radius=8))


@pytest.fixture(scope="session")
def cm3():
    return critical.check_critical(cellular.generate_rhombic_patch(1.0, "square", radius=3))


@pytest.fixture(scope="session")
def cm_trihex():
    return critical.check_critical(cellular.generate_rhombic_patch(1.0, "trihex", radius=3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
