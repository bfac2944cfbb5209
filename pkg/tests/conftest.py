import math

import pytest

from freesim.dynamics import BodyParams, Loads
from freesim.geometry import ElastomerParams, Geometry
from freesim.units import GRAVITY, PA_PER_PSI

MASS = 0.028


@pytest.fixture
def geom40():
    return Geometry.from_degrees(40.0, 0.11, 0.007)


@pytest.fixture
def body():
    return BodyParams.thin_ring(MASS, 0.007)


@pytest.fixture
def elas_settle():
    # constant-pressure settling set
    return ElastomerParams(k_e=10110.0, k_t=0.18, c_e=5.0, c_t=0.005)


@pytest.fixture
def bench_plant():
    """Negative-winding bench FREE with its identified elastomer."""
    return (Geometry.from_degrees(-40.0, 0.12, 0.007),
            BodyParams.thin_ring(MASS, 0.007),
            ElastomerParams(k_e=16478.0, k_t=0.0862, c_e=0.34, c_t=3.97e-5),
            Loads(MASS * GRAVITY))


def psi(x):
    return x * PA_PER_PSI


def deg(x):
    return math.radians(x)
