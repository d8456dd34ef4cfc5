import math

import numpy as np
import pytest
from scipy import integrate

from unitrootmdp.models import NoiseModel
from unitrootmdp.noise import gaussian_integrability_radius, sample, verify_integrability
from unitrootmdp.utils import stream_rng


def test_sample_supports(rademacher_noise, three_point_noise):
    """Test that discrete samplers only return support points."""
    values = sample(rademacher_noise, 1000, stream_rng(1))
    assert set(np.unique(values)) == {-1.0, 1.0}

    values = sample(three_point_noise, 1000, stream_rng(1))
    assert set(np.unique(values)) <= {-1.0, 0.0, 1.0}


def test_sample_uniform_range():
    values = sample(NoiseModel.uniform(2.0), 1000, stream_rng(2))
    assert values.shape == (1000,)
    assert np.all(np.abs(values) <= 2.0)


def test_sample_moments(normal_noise, three_point_noise):
    """Test that sample moments are close to the exact ones."""
    values = sample(normal_noise, 200_000, stream_rng(5))
    assert values.mean() == pytest.approx(0.0, abs=0.02)
    assert (values**2).mean() == pytest.approx(1.0, abs=0.02)

    values = sample(three_point_noise, 200_000, stream_rng(5))
    assert (values**2).mean() == pytest.approx(0.5, abs=0.01)


def test_sample_validation(normal_noise):
    with pytest.raises(ValueError):
        sample(normal_noise, 0, stream_rng(1))


def test_sample_reproducible(normal_noise):
    """Test that the same stream key reproduces the same noise."""
    np.testing.assert_array_equal(
        sample(normal_noise, 10, stream_rng(4, 1)), sample(normal_noise, 10, stream_rng(4, 1))
    )


def test_integrability_normal():
    """Test E exp(alpha xi^2) for the normal law on both sides of 1 / (2 sigma^2)."""
    check = verify_integrability(NoiseModel.normal(), 0.25)
    assert check.finite
    assert check.value == pytest.approx(math.sqrt(2.0))

    check = verify_integrability(NoiseModel.normal(), 0.5)
    assert not check.finite
    assert check.value == math.inf

    assert gaussian_integrability_radius(NoiseModel.normal(2.0)) == pytest.approx(0.125)


def test_integrability_bounded_laws(rademacher_noise, three_point_noise):
    """Test that bounded laws are integrable for every alpha."""
    check = verify_integrability(rademacher_noise, 3.0)
    assert check.finite
    assert check.value == pytest.approx(math.exp(3.0))

    check = verify_integrability(three_point_noise, 1.0)
    assert check.value == pytest.approx(0.5 + 0.5 * math.e)

    assert gaussian_integrability_radius(rademacher_noise) == math.inf


def test_integrability_uniform_matches_quadrature():
    """Test the uniform closed form against numerical integration."""
    half_width, alpha = 1.5, 0.7
    expected, _ = integrate.quad(
        lambda x: math.exp(alpha * x * x) / (2.0 * half_width), -half_width, half_width
    )
    check = verify_integrability(NoiseModel.uniform(half_width), alpha)
    assert check.value == pytest.approx(expected, rel=1e-10)


def test_integrability_validation(normal_noise):
    with pytest.raises(ValueError):
        verify_integrability(normal_noise, 0.0)


def test_integrability_witness(normal_noise, rademacher_noise):
    """Test that the advertised witness alpha is integrable."""
    for model in (normal_noise, rademacher_noise, NoiseModel.uniform()):
        assert verify_integrability(model, model.integrability_alpha).finite
