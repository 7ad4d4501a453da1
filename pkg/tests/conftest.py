import numpy as np
import pytest
from hypothesis import settings

from nearparabolic.fatou import build_chart
from nearparabolic.maps import QuadraticMap

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def chart02():
    return build_chart(QuadraticMap(0.02))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
