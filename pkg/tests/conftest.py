from fractions import Fraction

import pytest

from unitrootmdp.ar1 import simulate
from unitrootmdp.config import reset_global_config
from unitrootmdp.models import NoiseModel, SchedulePoint, UWindow
from unitrootmdp.utils import stream_rng


@pytest.fixture(autouse=True)
def clean_global_config(monkeypatch):
    """Start every test from built-in defaults and without a seed in the environment."""
    monkeypatch.delenv('UNITROOTMDP_SEED', raising=False)
    reset_global_config()
    yield
    reset_global_config()


@pytest.fixture
def normal_noise():
    return NoiseModel.normal()


@pytest.fixture
def rademacher_noise():
    return NoiseModel.rademacher()


@pytest.fixture
def three_point_noise():
    """Centered law on {-1, 0, 1} with probabilities (1/4, 1/2, 1/4)."""
    return NoiseModel.discrete((-1.0, 0.0, 1.0), (Fraction(1, 4), Fraction(1, 2), Fraction(1, 4)))


@pytest.fixture
def finite_laws(rademacher_noise, three_point_noise):
    return [rademacher_noise, three_point_noise]


@pytest.fixture
def short_path(normal_noise):
    """A seeded path with enough retained history for m <= 12 approximants."""
    return simulate(0.6, 50, normal_noise, stream_rng(3, 0, 0), history=12)


@pytest.fixture
def small_window(rademacher_noise):
    """Window with M = 1 and m = 5 small enough to enumerate."""
    return UWindow.for_noise(rademacher_noise, m=5, theta=0.5, m_max=1)


@pytest.fixture
def two_points():
    """Two cheap schedule points with m above 2M for the default M = 5."""
    return [
        SchedulePoint(n=120, theta=0.8, b=1.5, m=11),
        SchedulePoint(n=240, theta=0.85, b=1.7, m=12),
    ]
