from fractions import Fraction

import numpy as np
import pytest

from unitrootmdp.exceptions import ConfigurationError, HistoryRangeError
from unitrootmdp.models import (
    InitPolicy,
    NoiseKind,
    NoiseModel,
    RateCurve,
    SamplePath,
    SchedulePoint,
    StatisticKind,
    TailEstimate,
    TruncationSpec,
    UWindow,
)


def test_noise_model_defaults():
    """Test that NoiseModel defaults to the standard normal law."""
    model = NoiseModel()
    assert model.kind == NoiseKind.NORMAL
    assert model.second_moment == 1.0
    assert model.fourth_moment == 3.0
    assert not model.is_bounded


def test_noise_model_moments():
    """Test the exact second and fourth moments of every built-in law."""
    assert NoiseModel.normal(2.0).second_moment == pytest.approx(4.0)
    assert NoiseModel.normal(2.0).fourth_moment == pytest.approx(48.0)
    assert NoiseModel.rademacher().second_moment == 1.0
    assert NoiseModel.rademacher().fourth_moment == 1.0
    assert NoiseModel.uniform(1.0).second_moment == pytest.approx(1.0 / 3.0)
    assert NoiseModel.uniform(1.0).fourth_moment == pytest.approx(1.0 / 5.0)
    assert NoiseModel.three_point().second_moment == 0.5
    assert NoiseModel.three_point().fourth_moment == 0.5
    assert NoiseModel.normal().moment(3) == 0.0
    assert NoiseModel.rademacher().moment(0) == 1.0


def test_noise_model_discrete_validation():
    """Test that discrete laws must be centered probability vectors."""
    with pytest.raises(ValueError):
        NoiseModel.discrete((0.0, 1.0), (Fraction(1, 2), Fraction(1, 2)))

    with pytest.raises(ValueError):
        NoiseModel.discrete((-1.0, 1.0), (Fraction(1, 2), Fraction(1, 3)))

    with pytest.raises(ValueError):
        NoiseModel.discrete((-1.0, 1.0), (Fraction(1, 2),))

    with pytest.raises(ValueError):
        NoiseModel.discrete((-1.0, -1.0), (Fraction(1, 2), Fraction(1, 2)))


def test_noise_model_probability_strings():
    """Test that probabilities given as strings parse to exact fractions."""
    model = NoiseModel.discrete((-2.0, 0.0, 2.0), ('1/8', '3/4', '1/8'))
    assert model.probabilities == (Fraction(1, 8), Fraction(3, 4), Fraction(1, 8))
    assert model.second_moment == 1.0
    assert model.max_abs == 2.0


def test_noise_model_exact_support():
    """Test that only finite-support laws expose an exact support."""
    support, probabilities = NoiseModel.rademacher().exact_support()
    assert support == (-1.0, 1.0)
    assert sum(probabilities) == 1

    with pytest.raises(ConfigurationError):
        NoiseModel.normal().exact_support()

    with pytest.raises(ConfigurationError):
        NoiseModel.uniform().exact_support()


def test_sample_path_shape_validation():
    """Test that SamplePath checks the state and noise lengths."""
    states = np.zeros(4)
    noise = np.zeros(4)
    path = SamplePath(
        theta=0.5,
        n=3,
        states=states,
        noise=noise,
        first_index=0,
        init_policy=InitPolicy.TRUNCATED_SERIES,
    )
    assert path.history == 1

    with pytest.raises(ValueError):
        SamplePath(
            theta=0.5,
            n=3,
            states=np.zeros(3),
            noise=noise,
            first_index=0,
            init_policy=InitPolicy.TRUNCATED_SERIES,
        )

    with pytest.raises(ValueError):
        SamplePath(
            theta=1.0,
            n=3,
            states=states,
            noise=noise,
            first_index=0,
            init_policy=InitPolicy.TRUNCATED_SERIES,
        )


def test_sample_path_index_access():
    """Test xi and x lookups and their range errors."""
    path = SamplePath(
        theta=0.0,
        n=2,
        states=np.array([1.0, 2.0, 3.0]),
        noise=np.array([1.0, 2.0, 3.0]),
        first_index=0,
        init_policy=InitPolicy.TRUNCATED_SERIES,
    )
    assert path.xi(2) == 3.0
    assert path.x(1) == 2.0
    np.testing.assert_array_equal(path.xi_range(1, 2), [2.0, 3.0])

    with pytest.raises(HistoryRangeError):
        path.xi(-1)

    with pytest.raises(IndexError):
        path.x(3)


def test_u_window_validation(rademacher_noise):
    """Test that UWindow requires m > 2M and lags within M."""
    window = UWindow.for_noise(rademacher_noise, m=5, theta=0.5, m_max=2)
    assert window.with_lags(2, 1).q == 1
    assert window.with_lags(1).q == 1

    with pytest.raises(ValueError):
        UWindow.for_noise(rademacher_noise, m=4, theta=0.5, m_max=2)

    with pytest.raises(ValueError):
        window.with_lags(3)

    with pytest.raises(ValueError):
        UWindow.for_noise(rademacher_noise, m=5, theta=0.5, m_max=2, coefficients=(1.0, 2.0))


def test_schedule_point_validation():
    """Test that schedule points need b > 1 and theta in [0, 1)."""
    point = SchedulePoint(n=100, theta=0.9, b=2.0, m=11)
    assert point.m == 11

    with pytest.raises(ValueError):
        SchedulePoint(n=100, theta=0.9, b=1.0, m=11)

    with pytest.raises(ValueError):
        SchedulePoint(n=100, theta=1.0, b=2.0, m=11)


def test_truncation_threshold():
    """Test the truncation level tau sqrt(n) / b."""
    assert TruncationSpec(tau=2.0, n=400, b=4.0).threshold == pytest.approx(10.0)


def test_tail_estimate_interval_must_contain_estimate():
    """Test that a TailEstimate rejects intervals excluding p_hat."""
    estimate = TailEstimate(
        r=1.0,
        hits=10,
        replicates=100,
        p_hat=0.1,
        ci_low=0.06,
        ci_high=0.15,
        empirical_rate=0.5,
        theoretical_rate=0.5,
    )
    assert estimate.well_estimated
    assert estimate.rate_ratio == pytest.approx(1.0)

    with pytest.raises(ValueError):
        TailEstimate(
            r=1.0,
            hits=10,
            replicates=100,
            p_hat=0.1,
            ci_low=0.12,
            ci_high=0.17,
            empirical_rate=0.5,
            theoretical_rate=0.5,
        )


def test_rate_curve_grid_must_increase():
    """Test that a RateCurve needs a strictly increasing r grid."""
    point = SchedulePoint(n=100, theta=0.9, b=2.0, m=11)

    def estimate(r):
        return TailEstimate(
            r=r,
            hits=0,
            replicates=10,
            p_hat=0.0,
            ci_low=0.0,
            ci_high=0.3,
            empirical_rate=0.5,
            theoretical_rate=0.1,
            lower_bound=True,
        )

    curve = RateCurve(
        point_id=0, point=point, kind=StatisticKind.COVARIANCE, estimates=[estimate(1.0)]
    )
    assert curve.convergence_diagnostic() is None
    assert curve.to_rows()[0]['r'] == 1.0

    with pytest.raises(ValueError):
        RateCurve(
            point_id=0,
            point=point,
            kind=StatisticKind.COVARIANCE,
            estimates=[estimate(1.0), estimate(1.0)],
        )
