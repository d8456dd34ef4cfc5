import logging
import math

import pytest

from unitrootmdp.exceptions import DegenerateRateError, ScheduleInvalidError
from unitrootmdp.mdpcore import (
    CONDITION_DIRECTIONS,
    RateFunction,
    RateKind,
    make_schedule,
    make_schedule_from_points,
    point_conditions,
    rate_covariance,
    rate_estimator,
    rate_linear_combo,
    rate_m_dependent,
    scaled_covariance_deviation,
    scaled_estimator_deviation,
)
from unitrootmdp.models import SchedulePoint, StatisticKind


def test_rate_values():
    """Test the closed-form rates at simple arguments."""
    assert rate_covariance(1.0, 1.0) == pytest.approx(1.0 / 8.0)
    assert rate_covariance(2.0, 0.5) == pytest.approx(2.0)
    assert rate_linear_combo(1.0, [1.0, 1.0], 1.0) == pytest.approx(1.0 / 32.0)
    assert rate_estimator(2.0) == pytest.approx(2.0)
    assert rate_m_dependent(1.0, 4.0) == pytest.approx(1.0 / 8.0)


def test_one_hot_linear_rate_is_covariance_rate():
    """Test that a single unit coefficient reproduces the covariance rate."""
    for r in (0.5, 1.0, 1.5):
        assert rate_linear_combo(r, [0.0, 1.0, 0.0], 2.0) == rate_covariance(r, 2.0)


def test_rate_validation():
    """Test that r <= 0 and zero-sum coefficients are rejected."""
    with pytest.raises(ValueError):
        rate_covariance(0.0, 1.0)

    with pytest.raises(DegenerateRateError):
        rate_linear_combo(1.0, [1.0, -1.0], 1.0)

    with pytest.raises(ValueError):
        rate_m_dependent(1.0, 0.0)

    with pytest.raises(ValueError):
        RateFunction(kind=RateKind.LINEAR_COMBO, coefficients=(1.0, -1.0))

    with pytest.raises(ValueError):
        RateFunction(kind=RateKind.M_DEPENDENT)


def test_rate_function_for_statistic():
    """Test that each statistic maps to its rate."""
    rate = RateFunction.for_statistic(StatisticKind.ESTIMATOR_LS, 3.0)
    assert rate.kind == RateKind.ESTIMATOR
    assert rate(1.0) == pytest.approx(0.5)

    rate = RateFunction.for_statistic(StatisticKind.COVARIANCE, 1.0)
    assert rate(1.0) == pytest.approx(1.0 / 8.0)

    rate = RateFunction.for_statistic(StatisticKind.LINEAR, 1.0, [0.5, 0.5])
    assert rate(1.0) == pytest.approx(1.0 / 8.0)

    with pytest.raises(ValueError):
        RateFunction.for_statistic(StatisticKind.LINEAR, 1.0, [1.0, -1.0])


def test_schedule_accepts_admissible_exponents():
    """Test that (beta, gamma_b) = (0.15, 0.1) is accepted with m = ceil((1-theta)^(-6/5))."""
    schedule = make_schedule(0.15, 0.1, [10_000, 100_000, 1_000_000])
    assert len(schedule.points) == 3
    thetas = [point.theta for point in schedule.points]
    assert thetas == sorted(thetas)
    for point in schedule.points:
        assert point.theta == pytest.approx(1.0 - point.n**-0.15)
        assert point.b == pytest.approx(point.n**0.1)
        assert point.m == math.ceil((1.0 - point.theta) ** -1.2)
    assert [point.m for point in schedule.points] == [6, 8, 13]
    assert schedule.points[-1].theta == pytest.approx(0.8741, abs=1e-4)


@pytest.mark.parametrize(
    'beta, gamma_b, n_values, truncations',
    [
        (0.15, 0.1, [10_000, 100_000, 1_000_000], [6, 8, 13]),
        (0.15, 0.05, [10_000, 50_000, 200_000], [6, 8, 9]),
    ],
)
def test_schedule_growth_trends(beta, gamma_b, n_values, truncations):
    """Test that m grows with n and the rate and block quantities move the right way."""
    schedule = make_schedule(beta, gamma_b, n_values)
    assert [point.m for point in schedule.points] == truncations
    trends = schedule.trends()
    assert trends['sqrt_n_gap2_over_b']
    assert trends['n_gap']
    assert trends['b_m53_over_sqrt_n']
    # 1 - theta > exp(-5) at every point, where m(1-theta)/|log(1-theta)| still falls
    assert schedule.pre_asymptotic()


def test_schedule_trends_hold_in_the_growth_regime():
    """Test that every monitored quantity moves its way once 1 - theta < exp(-5)."""
    schedule = make_schedule(0.15, 0.05, [10**16, 10**18, 10**20])
    assert [point.m for point in schedule.points] == [759, 1738, 3982]
    assert not schedule.pre_asymptotic()
    assert all(schedule.trends().values())


def test_schedule_rejects_truncation_below_lags():
    """Test that a point with m <= 2M is an error rather than a silently widened m."""
    with pytest.raises(ScheduleInvalidError, match='m=6'):
        make_schedule(0.15, 0.1, [10_000, 100_000], m_max=5)

    schedule = make_schedule(0.15, 0.1, [100_000, 1_000_000], m_max=3)
    assert [point.m for point in schedule.points] == [8, 13]


def test_schedule_rejects_fast_growth():
    """Test that (beta, gamma_b) = (0.2, 0.2) violates sqrt(n)(1-theta)^2/b -> inf."""
    with pytest.raises(ScheduleInvalidError):
        make_schedule(0.2, 0.2, [10_000, 100_000])


def test_schedule_rejects_bad_truncation_exponent():
    """Test that the m exponent must lie strictly inside (1, 1.25)."""
    with pytest.raises(ScheduleInvalidError):
        make_schedule(0.15, 0.1, [10_000], m_exponent=1.0)

    with pytest.raises(ScheduleInvalidError):
        make_schedule(0.15, 0.1, [10_000], m_exponent=1.3)


def test_schedule_rejects_block_growth():
    """Test that b m^(5/3)/sqrt(n) must vanish."""
    with pytest.raises(ScheduleInvalidError):
        make_schedule(0.2, 0.09, [10_000], m_exponent=1.24)


def test_schedule_validation():
    with pytest.raises(ValueError):
        make_schedule(0.0, 0.1, [10_000])

    with pytest.raises(ValueError):
        make_schedule(0.15, 0.1, [1])


def test_schedule_deduplicates_and_sorts():
    schedule = make_schedule(0.15, 0.1, [50_000, 10_000, 50_000], m_max=1)
    assert [point.n for point in schedule.points] == [10_000, 50_000]


def test_schedule_constants(two_points):
    """Test K_n and K_m on explicit points."""
    schedule = make_schedule_from_points(two_points)
    assert schedule.k_n(0) == pytest.approx(25.0)
    assert schedule.k_m(0) == pytest.approx(sum(0.8**j for j in range(1, 11)))


def test_schedule_rejects_narrow_truncation():
    """Test that explicit points need m > 2M."""
    with pytest.raises(ValueError):
        make_schedule_from_points([SchedulePoint(n=100, theta=0.9, b=2.0, m=10)], m_max=5)


def test_condition_table_and_trends(two_points):
    """Test the monitored quantities and their advisory trend flags."""
    schedule = make_schedule_from_points(two_points)
    table = schedule.condition_table()
    assert len(table) == 2
    assert set(CONDITION_DIRECTIONS) <= set(table.columns)
    trends = schedule.trends()
    assert set(trends) == set(CONDITION_DIRECTIONS)
    assert trends['n_gap']


def test_trend_violations_only_warn(caplog):
    """Test that a quantity moving the wrong way is logged, not raised."""
    points = [
        SchedulePoint(n=1000, theta=0.9, b=2.0, m=20),
        SchedulePoint(n=2000, theta=0.9, b=2.0, m=11),
    ]
    with caplog.at_level(logging.WARNING, logger='unitrootmdp.mdpcore'):
        schedule = make_schedule_from_points(points)
    assert not schedule.trends()['gap_m']
    assert 'advisory' in caplog.text


def test_point_conditions():
    point = SchedulePoint(n=10_000, theta=0.9, b=2.0, m=20)
    row = point_conditions(point)
    assert row['n_gap'] == pytest.approx(1000.0)
    assert row['sqrt_n_gap2_over_b'] == pytest.approx(0.5)
    assert row['gap_m'] == pytest.approx(2.0)
    assert row['k_n'] == pytest.approx(100.0)


def test_scaled_deviations():
    """Test the MDP scalings of covariance and estimator errors."""
    value = scaled_covariance_deviation(1.5, 1.0, 0.0, 100, 1, 2.0)
    assert value == pytest.approx(2.5)
    centered = scaled_covariance_deviation(1.5, 1.0, 0.0, 100, 19, 2.0, centered=True)
    assert centered == pytest.approx(2.25)
    assert scaled_estimator_deviation(0.5, 0.0, 100, 5.0) == pytest.approx(1.0)
