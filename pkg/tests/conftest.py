import numpy as np
import pytest

from g2sphere.config import Settings
from g2sphere.params import AnsatzParams, GeneralParams
from g2sphere.torsion import NEARLY_PARALLEL_R, SQUASHED_R


@pytest.fixture
def rng():
    """Seeded generator so randomized tests are reproducible."""
    return np.random.default_rng(20240607)


@pytest.fixture
def settings():
    return Settings()


@pytest.fixture
def round_sphere():
    """Nearly parallel structure on the round sphere, r = 2^{1/3}, h = 1."""
    return AnsatzParams.create(r=NEARLY_PARALLEL_R, h=(1.0, 0.0, 0.0, 0.0))


@pytest.fixture
def squashed_sphere():
    """Nearly parallel structure on the squashed sphere, r = (2/5)^{1/3}, h = j."""
    return AnsatzParams.create(r=SQUASHED_R, h=(0.0, 0.0, 1.0, 0.0))


@pytest.fixture
def generic_ansatz():
    """Ansatz point off every critical set."""
    return AnsatzParams.create(r=1.5, h=(0.5, 0.5, 0.5, 0.5))


@pytest.fixture
def generic_general():
    """General-family point with distinct radii and two negative ones."""
    return GeneralParams.create(r1=1.3, r2=-0.8, r3=-1.1, h=(0.5, -0.5, 0.5, 0.5))
