"""
Rate functions, experiment schedules (theta_n, b_n, m(n)) and MDP scalings.
"""

import logging
import math
from collections.abc import Sequence
from enum import Enum
from typing import Optional

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .exceptions import DegenerateRateError, ScheduleInvalidError
from .models import (
    DEFAULT_GAMMA_DEP,
    DEFAULT_M_EXPONENT,
    DEFAULT_SCHEDULE_M_MAX,
    SchedulePoint,
    StatisticKind,
)
from .utils import k_m, k_n

logger = logging.getLogger(__name__)

# Admissible truncation exponents: m(1 - theta) -> inf needs > 1, b m^(5/3)/sqrt(n) -> 0 caps it
M_EXPONENT_RANGE = (1.0, 1.25)

# Monitored growth quantities and the direction they must move along a schedule
CONDITION_DIRECTIONS = {
    'sqrt_n_gap2_over_b': 'increasing',  # sqrt(n)(1-theta)^2/b -> inf
    'n_gap': 'increasing',  # n(1-theta) -> inf
    'gap_m': 'increasing',  # (1-theta) m -> inf
    'gap_m_over_log': 'increasing',  # m(1-theta)/|log(1-theta)| -> inf
    'b_m53_over_sqrt_n': 'decreasing',  # b m^(5/3)/sqrt(n) -> 0
}


class RateKind(str, Enum):
    """Closed-form moderate deviation rate functions"""

    COVARIANCE = 'covariance'  # r^2 / (8 (E xi^2)^2)
    LINEAR_COMBO = 'linear-combo'  # r^2 / (2 Sigma^2), Sigma^2 = 4 (sum a)^2 (E xi^2)^2
    ESTIMATOR = 'estimator'  # r^2 / 2
    M_DEPENDENT = 'm-dependent'  # r^2 / (2 sigma^2)


def _check_r(r: float) -> None:
    if r <= 0:
        raise ValueError(f'r must be positive, got {r}')


def rate_covariance(r: float, second_moment: float) -> float:
    _check_r(r)
    return r * r / (8.0 * second_moment**2)


def rate_linear_combo(r: float, coefficients: Sequence[float], second_moment: float) -> float:
    """
    r^2 / (2 Sigma^2) with Sigma^2 = 4 (sum a_j)^2 (E xi^2)^2.

    Raises:
        DegenerateRateError: If the coefficients sum to zero
    """
    _check_r(r)
    total = math.fsum(coefficients)
    if total == 0.0:
        raise DegenerateRateError(
            f'coefficients {tuple(coefficients)} sum to zero: rate is degenerate'
        )
    sigma2 = 4.0 * total * total * second_moment**2
    return r * r / (2.0 * sigma2)


def rate_estimator(r: float) -> float:
    _check_r(r)
    return r * r / 2.0


def rate_m_dependent(r: float, sigma2: float) -> float:
    """Rate r^2 / (2 sigma^2) of an m-dependent sum with limiting variance sigma^2."""
    _check_r(r)
    if sigma2 <= 0:
        raise ValueError(f'sigma2 must be positive, got {sigma2}')
    return r * r / (2.0 * sigma2)


class RateFunction(BaseModel):
    """A quadratic moderate deviation rate I(r)"""

    kind: RateKind
    second_moment: float = Field(1.0, description='E xi^2', gt=0)
    coefficients: Optional[tuple[float, ...]] = Field(None, description='Linear-combo weights')
    sigma2: Optional[float] = Field(None, description='Limit variance (m-dependent kind)', gt=0)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode='after')
    def _check_parameters(self) -> 'RateFunction':
        if self.kind == RateKind.LINEAR_COMBO:
            if not self.coefficients:
                raise ValueError('linear-combo rate needs coefficients')
            if math.fsum(self.coefficients) == 0.0:
                raise DegenerateRateError('linear-combo coefficients sum to zero')
        if self.kind == RateKind.M_DEPENDENT and self.sigma2 is None:
            raise ValueError('m-dependent rate needs sigma2')
        return self

    @classmethod
    def for_statistic(
        cls,
        kind: StatisticKind,
        second_moment: float,
        coefficients: Optional[Sequence[float]] = None,
    ) -> 'RateFunction':
        """
        Raises:
            DegenerateRateError: If linear coefficients sum to zero
        """
        if kind in (StatisticKind.ESTIMATOR_LS, StatisticKind.ESTIMATOR_YW):
            return cls(kind=RateKind.ESTIMATOR, second_moment=second_moment)
        if kind == StatisticKind.LINEAR:
            if coefficients and math.fsum(coefficients) == 0.0:
                raise DegenerateRateError(
                    f'coefficients {tuple(coefficients)} sum to zero: rate is degenerate'
                )
            return cls(
                kind=RateKind.LINEAR_COMBO,
                second_moment=second_moment,
                coefficients=tuple(coefficients or ()),
            )
        return cls(kind=RateKind.COVARIANCE, second_moment=second_moment)

    def __call__(self, r: float) -> float:
        if self.kind == RateKind.COVARIANCE:
            return rate_covariance(r, self.second_moment)
        if self.kind == RateKind.LINEAR_COMBO:
            return rate_linear_combo(r, self.coefficients, self.second_moment)
        if self.kind == RateKind.ESTIMATOR:
            return rate_estimator(r)
        return rate_m_dependent(r, self.sigma2)


class Schedule(BaseModel):
    """Family of experiment sizes with their growth exponents"""

    points: list[SchedulePoint] = Field(min_length=1)
    beta: Optional[float] = Field(None, description='theta_n = 1 - n^(-beta)', gt=0)
    gamma_b: Optional[float] = Field(None, description='b_n = n^(gamma_b)', gt=0)
    gamma_dep: float = Field(DEFAULT_GAMMA_DEP, description='gamma of condition (A)', gt=0, lt=1)
    m_exponent: float = Field(DEFAULT_M_EXPONENT, description='m = (1 - theta)^(-exponent)')
    m_max: int = Field(DEFAULT_SCHEDULE_M_MAX, description='Largest lag M', ge=0)

    @model_validator(mode='after')
    def _check_points(self) -> 'Schedule':
        for point in self.points:
            if point.m <= 2 * self.m_max:
                raise ValueError(f'point n={point.n} has m={point.m} <= 2M={2 * self.m_max}')
        return self

    def k_n(self, index: int) -> float:
        return k_n(self.points[index].theta)

    def k_m(self, index: int) -> float:
        point = self.points[index]
        return k_m(point.theta, point.m)

    def condition_table(self) -> pd.DataFrame:
        """Monitored growth quantities per point."""
        return pd.DataFrame([point_conditions(point) for point in self.points])

    def trends(self) -> dict[str, bool]:
        """Whether each monitored quantity moves in its required direction across points."""
        table = self.condition_table()
        result = {}
        for column, direction in CONDITION_DIRECTIONS.items():
            values = table[column].tolist()
            if direction == 'increasing':
                result[column] = all(b > a for a, b in zip(values, values[1:]))
            else:
                result[column] = all(b < a for a, b in zip(values, values[1:]))
        return result

    def pre_asymptotic(self) -> bool:
        """
        Whether every point lies where m(1-theta)/|log(1-theta)| still falls as theta -> 1.

        With m = (1-theta)^(-e) the ratio is (1-theta)^(1-e)/|log(1-theta)|, which increases
        only once |log(1-theta)| > 1/(e-1), i.e. 1-theta < exp(-5) for e = 6/5.
        """
        threshold = 1.0 / (self.m_exponent - 1.0)
        return all(abs(math.log(1.0 - point.theta)) < threshold for point in self.points)


def point_conditions(point: SchedulePoint) -> dict[str, float]:
    n, theta, b, m = point.n, point.theta, point.b, point.m
    gap = 1.0 - theta
    log_gap = abs(math.log(gap))
    return {
        'n': n,
        'theta': theta,
        'b': b,
        'm': m,
        'sqrt_n_gap2_over_b': math.sqrt(n) * gap * gap / b,
        'n_gap': n * gap,
        'gap_m': gap * m,
        'gap_m_over_log': m * gap / log_gap if log_gap > 0 else math.inf,
        'b_m53_over_sqrt_n': b * m ** (5.0 / 3.0) / math.sqrt(n),
        'k_n': k_n(theta),
        'k_m': k_m(theta, m),
        'kn_theta_m': k_n(theta) * theta**m * math.sqrt(1.0 - theta * theta),
    }


def _log_trends(schedule: Schedule) -> None:
    for column, ok in schedule.trends().items():
        if not ok:
            logger.warning(
                f'{column} is not {CONDITION_DIRECTIONS[column]} over the schedule points '
                '(advisory)'
            )
    if schedule.pre_asymptotic():
        logger.info(
            f'all points have |log(1-theta)| < {1.0 / (schedule.m_exponent - 1.0):.3g}; '
            'm(1-theta) and m(1-theta)/|log(1-theta)| are not yet in their growth regime'
        )


def make_schedule(
    beta: float,
    gamma_b: float,
    n_values: Sequence[int],
    m_exponent: float = DEFAULT_M_EXPONENT,
    gamma_dep: float = DEFAULT_GAMMA_DEP,
    m_max: int = DEFAULT_SCHEDULE_M_MAX,
) -> Schedule:
    """
    Power-law schedule theta = 1 - n^(-beta), b = n^(gamma_b), m = ceil((1 - theta)^(-exponent)).

    Args:
        m_max: Largest lag M the schedule serves; every point needs m > 2M

    Raises:
        ScheduleInvalidError: If sqrt(n)(1-theta)^2/b does not diverge, the exponent
            breaks m(1-theta) -> inf or b m^(5/3)/sqrt(n) -> 0, or some point has m <= 2M
    """
    if beta <= 0 or gamma_b <= 0:
        raise ScheduleInvalidError(f'beta and gamma_b must be positive, got {beta}, {gamma_b}')
    margin = 0.5 - 2.0 * beta - gamma_b
    if margin <= 0:
        raise ScheduleInvalidError(
            'sqrt(n)(1-theta)^2/b -> inf requires 1/2 - 2*beta - gamma_b > 0, '
            f'got 1/2 - 2*{beta} - {gamma_b} = {margin:.6g}'
        )
    low, high = M_EXPONENT_RANGE
    if not low < m_exponent < high:
        raise ScheduleInvalidError(f'm exponent must lie in ({low}, {high}), got {m_exponent}')
    block_exponent = gamma_b + 5.0 * beta * m_exponent / 3.0 - 0.5
    if block_exponent >= 0:
        raise ScheduleInvalidError(
            'b m^(5/3)/sqrt(n) -> 0 requires gamma_b + 5*beta*exponent/3 < 1/2, '
            f'got {gamma_b + 5.0 * beta * m_exponent / 3.0:.6g}'
        )
    ordered = sorted(set(int(n) for n in n_values))
    if not ordered or ordered[0] < 2:
        raise ScheduleInvalidError('schedule needs sample sizes n >= 2')

    points = []
    for n in ordered:
        gap = n ** (-beta)
        m = math.ceil(gap ** (-m_exponent))
        if m <= 2 * m_max:
            raise ScheduleInvalidError(
                f'n={n} gives m={m} <= 2M={2 * m_max}; use larger n or fewer lags'
            )
        points.append(SchedulePoint(n=n, theta=1.0 - gap, b=n**gamma_b, m=m))
    schedule = Schedule(
        points=points,
        beta=beta,
        gamma_b=gamma_b,
        gamma_dep=gamma_dep,
        m_exponent=m_exponent,
        m_max=m_max,
    )
    logger.info(f'accepted schedule beta={beta} gamma_b={gamma_b} with {len(points)} points')
    _log_trends(schedule)
    return schedule


def make_schedule_from_points(
    points: Sequence[SchedulePoint],
    gamma_dep: float = DEFAULT_GAMMA_DEP,
    m_max: int = DEFAULT_SCHEDULE_M_MAX,
) -> Schedule:
    """Schedule from an explicit point list (no power-law generator)."""
    schedule = Schedule(points=list(points), gamma_dep=gamma_dep, m_max=m_max)
    _log_trends(schedule)
    return schedule


def scaled_covariance_deviation(
    empirical: float,
    theoretical: float,
    theta: float,
    n: int,
    l: int,  # noqa: E741
    b: float,
    centered: bool = False,
) -> float:
    """
    (1 - theta^2)^(3/2) sqrt(n) / b * |C* - C|.

    Args:
        centered: Use sqrt(n - l) instead of sqrt(n); both scalings share one limit
    """
    length = n - l if centered else n
    return (1.0 - theta * theta) ** 1.5 * math.sqrt(length) / b * abs(empirical - theoretical)


def scaled_estimator_deviation(estimate: float, theta: float, n: int, b: float) -> float:
    """sqrt(n) / (b sqrt(1 - theta^2)) * |theta_hat - theta|."""
    return math.sqrt(n) / (b * math.sqrt(1.0 - theta * theta)) * abs(estimate - theta)
