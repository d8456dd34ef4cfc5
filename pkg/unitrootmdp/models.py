"""
Data models for near-unit-root moderate deviation experiments.

This module contains the Pydantic models, enums and default constants
shared by the simulation, moment and Monte Carlo modules.
"""

from enum import Enum
from fractions import Fraction
from math import factorial, inf
from typing import Any, Optional

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    field_serializer,
    field_validator,
    model_validator,
)

from .exceptions import ConfigurationError, HistoryRangeError

# Default experiment settings
DEFAULT_M_MAX = 5  # Largest covariance lag M considered by any experiment
DEFAULT_SCHEDULE_M_MAX = 1  # M of the default covariance runs (lags 0 and 1)
DEFAULT_EPS_INIT = 1e-12  # Bias tolerance theta^H of the truncated-series start
DEFAULT_M_EXPONENT = 1.2  # m = ceil((1 - theta)^(-6/5))
DEFAULT_GAMMA_DEP = 2.0 / 3.0  # gamma of blocking condition (A)
DEFAULT_ALPHA0 = 4.0  # Maximal-inequality constants (alpha0, beta0)
DEFAULT_BETA0 = 2.0
DEFAULT_TAU = 1.0  # Truncation level tau in tau * sqrt(n) / b
DEFAULT_CONDITION_B_M = 1.0  # Free constant M of blocking condition (B)
ENUMERATION_GUARD = 2**26  # Largest number of joint noise assignments enumerated
IDENTITY_TOLERANCE = 1e-10  # Tolerance for exact algebraic identities
WILSON_Z = 1.959963984540054  # Two-sided 95% normal quantile
LOW_POWER_REPLICATES = 100  # KS checks below this replicate count are flagged


class NoiseKind(str, Enum):
    """Supported centered driving-noise laws"""

    NORMAL = 'normal'  # N(0, sigma^2)
    RADEMACHER = 'rademacher'  # +1/-1 with probability 1/2
    UNIFORM = 'uniform'  # Uniform on [-a, a]
    DISCRETE = 'discrete'  # Finite support with exact rational probabilities


class InitPolicy(str, Enum):
    """How the stationary starting value X_0 is produced"""

    EXACT_GAUSSIAN = 'exact-gaussian'  # Draw X_0 from its exact stationary normal law
    TRUNCATED_SERIES = 'truncated-series'  # Moving-average series cut at horizon H


class MomentKind(str, Enum):
    """Moment queries answered by closed forms and by the enumeration oracle"""

    MEAN = 'mean'
    VARIANCE = 'variance'
    SAME_LAG_CROSS = 'same-lag-cross'
    MIXED_CROSS = 'mixed-cross'
    HAT_VARIANCE = 'hat-variance'
    BLOCK_VARIANCE = 'block-variance'


class StatisticKind(str, Enum):
    """MDP-scaled statistics the Monte Carlo engine can tabulate"""

    COVARIANCE = 'covariance'
    LINEAR = 'linear'
    ESTIMATOR_LS = 'estimator-ls'
    ESTIMATOR_YW = 'estimator-yw'
    APPROXIMANT = 'approximant'


def _as_fraction(value: Any) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**12)
    return Fraction(value)


class IntegrabilityCheck(BaseModel):
    """Result of checking E exp(alpha xi^2) < infinity"""

    alpha: float = Field(description='Exponent alpha that was checked', gt=0)
    finite: bool = Field(description='Whether E exp(alpha xi^2) is finite')
    value: float = Field(description='E exp(alpha xi^2), or inf when it diverges')


class NoiseModel(BaseModel):
    """A centered i.i.d. driving-noise law and its exact moments"""

    kind: NoiseKind = Field(NoiseKind.NORMAL, description='Law of the driving noise')
    sigma: float = Field(1.0, description='Standard deviation of the normal law', gt=0)
    half_width: float = Field(1.0, description='Half-width a of the uniform law on [-a, a]', gt=0)
    support: tuple[float, ...] = Field((), description='Support points of a discrete law')
    probabilities: tuple[Fraction, ...] = Field(
        (), description='Exact probabilities of the support points'
    )

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator('probabilities', mode='before')
    @classmethod
    def _parse_probabilities(cls, value: Any) -> tuple[Fraction, ...]:
        return tuple(_as_fraction(p) for p in value)

    @field_serializer('probabilities')
    def _dump_probabilities(self, value: tuple[Fraction, ...]) -> list[str]:
        return [str(p) for p in value]

    @model_validator(mode='after')
    def _check_law(self) -> 'NoiseModel':
        if self.kind != NoiseKind.DISCRETE:
            return self
        if not self.support or len(self.support) != len(self.probabilities):
            raise ValueError('discrete noise needs matching support and probabilities')
        if len(set(self.support)) != len(self.support):
            raise ValueError('discrete support points must be distinct')
        if any(p <= 0 for p in self.probabilities):
            raise ValueError('discrete probabilities must be positive')
        if sum(self.probabilities) != 1:
            raise ValueError(f'discrete probabilities sum to {sum(self.probabilities)}, not 1')
        mean = sum(Fraction(x) * p for x, p in zip(self.support, self.probabilities))
        if mean != 0:
            raise ValueError(f'discrete noise must be centered, mean is {mean}')
        return self

    @classmethod
    def normal(cls, sigma: float = 1.0) -> 'NoiseModel':
        return cls(kind=NoiseKind.NORMAL, sigma=sigma)

    @classmethod
    def rademacher(cls) -> 'NoiseModel':
        return cls(kind=NoiseKind.RADEMACHER)

    @classmethod
    def uniform(cls, half_width: float = 1.0) -> 'NoiseModel':
        return cls(kind=NoiseKind.UNIFORM, half_width=half_width)

    @classmethod
    def discrete(cls, support: tuple[float, ...], probabilities: tuple[Any, ...]) -> 'NoiseModel':
        return cls(kind=NoiseKind.DISCRETE, support=support, probabilities=probabilities)

    @classmethod
    def three_point(cls) -> 'NoiseModel':
        """The law on {-1, 0, 1} with probabilities (1/4, 1/2, 1/4)."""
        return cls.discrete((-1.0, 0.0, 1.0), (Fraction(1, 4), Fraction(1, 2), Fraction(1, 4)))

    @property
    def is_bounded(self) -> bool:
        return self.kind != NoiseKind.NORMAL

    @property
    def has_finite_support(self) -> bool:
        return self.kind in (NoiseKind.RADEMACHER, NoiseKind.DISCRETE)

    def exact_support(self) -> tuple[tuple[float, ...], tuple[Fraction, ...]]:
        """
        Support points and exact probabilities of a finite-support law.

        Raises:
            ConfigurationError: If the law is continuous
        """
        if self.kind == NoiseKind.RADEMACHER:
            return (-1.0, 1.0), (Fraction(1, 2), Fraction(1, 2))
        if self.kind == NoiseKind.DISCRETE:
            return self.support, self.probabilities
        raise ConfigurationError(f'{self.kind.value} noise has no finite support')

    def moment(self, p: int) -> float:
        """
        Exact raw moment E xi^p.

        Args:
            p: Non-negative integer order

        Returns:
            The p-th moment of the law
        """
        if p < 0:
            raise ValueError(f'moment order must be non-negative, got {p}')
        if p == 0:
            return 1.0
        if self.has_finite_support:
            support, probabilities = self.exact_support()
            return float(sum(Fraction(x) ** p * w for x, w in zip(support, probabilities)))
        if p % 2 == 1:
            return 0.0
        if self.kind == NoiseKind.NORMAL:
            double_factorial = factorial(p) // (2 ** (p // 2) * factorial(p // 2))
            return double_factorial * self.sigma**p
        return self.half_width**p / (p + 1)

    @property
    def second_moment(self) -> float:
        return self.moment(2)

    @property
    def fourth_moment(self) -> float:
        return self.moment(4)

    @property
    def max_abs(self) -> float:
        """Essential supremum of |xi| (inf for the normal law)."""
        if self.kind == NoiseKind.NORMAL:
            return inf
        if self.kind == NoiseKind.UNIFORM:
            return self.half_width
        return max(abs(x) for x in self.exact_support()[0])

    @property
    def integrability_alpha(self) -> float:
        """A witness alpha with E exp(alpha xi^2) finite."""
        if self.kind == NoiseKind.NORMAL:
            return 1.0 / (4.0 * self.sigma**2)
        return 1.0


class SamplePath(BaseModel):
    """One simulated AR(1) trajectory X_0..X_n with the noise that generated it"""

    theta: float = Field(description='Autoregressive coefficient', ge=0, lt=1)
    n: int = Field(description='Path length', ge=1)
    states: np.ndarray = Field(description='States X_0, ..., X_n')
    noise: np.ndarray = Field(description='Noise xi_k for k = first_index, ..., n')
    first_index: int = Field(description='Time index of noise[0]', le=1)
    init_policy: InitPolicy = Field(description='Stationary start used for X_0')
    horizon: Optional[int] = Field(None, description='Series horizon H for truncated starts')

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode='after')
    def _check_shapes(self) -> 'SamplePath':
        if self.states.shape != (self.n + 1,):
            raise ValueError(f'expected {self.n + 1} states, got {self.states.shape}')
        if self.noise.shape != (self.n - self.first_index + 1,):
            raise ValueError('noise does not cover first_index..n')
        return self

    @property
    def history(self) -> int:
        """Number of retained noise values at indices <= 0."""
        return 1 - self.first_index

    def xi_range(self, start: int, stop: int) -> np.ndarray:
        """
        Noise values xi_start, ..., xi_stop (inclusive).

        Raises:
            HistoryRangeError: If the range is not retained
        """
        if start < self.first_index or stop > self.n:
            raise HistoryRangeError(
                f'noise indices {start}..{stop} outside retained range {self.first_index}..{self.n}'
            )
        return self.noise[start - self.first_index : stop - self.first_index + 1]

    def xi(self, k: int) -> float:
        return float(self.xi_range(k, k)[0])

    def x(self, k: int) -> float:
        if not 0 <= k <= self.n:
            raise HistoryRangeError(f'state index {k} outside 0..{self.n}')
        return float(self.states[k])


class CovarianceReport(BaseModel):
    """Empirical and theoretical lag-l covariance with the Z and U processes"""

    l: int = Field(description='Lag', ge=0)  # noqa: E741
    empirical: float = Field(description='Empirical covariance C*')
    theoretical: float = Field(description='Stationary covariance C')
    z_series: np.ndarray = Field(description='Z_k = X_{k+l} X_k - C for k = 0..n-l')
    u_series: np.ndarray = Field(description='U_k for k = 1..n-l')

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class UWindow(BaseModel):
    """Parameters identifying an m-dependent U moment query"""

    l: int = Field(0, description='Lag of the first U factor', ge=0)  # noqa: E741
    q: int = Field(0, description='Lag of the second U factor', ge=0)
    m: int = Field(description='Truncation width', ge=2)
    theta: float = Field(description='Autoregressive coefficient', ge=0, lt=1)
    second_moment: float = Field(description='E xi^2', gt=0)
    fourth_moment: float = Field(description='E xi^4', gt=0)
    m_max: int = Field(DEFAULT_M_MAX, description='Largest lag M', ge=0)
    coefficients: Optional[tuple[float, ...]] = Field(
        None, description='Linear-combination weights a_0..a_M'
    )

    model_config = ConfigDict(frozen=True)

    @model_validator(mode='after')
    def _check_window(self) -> 'UWindow':
        if self.l > self.m_max or self.q > self.m_max:
            raise ValueError(f'lags ({self.l}, {self.q}) exceed M = {self.m_max}')
        if self.m <= 2 * self.m_max:
            raise ValueError(f'truncation width m = {self.m} must exceed 2M = {2 * self.m_max}')
        if self.fourth_moment < self.second_moment**2 * (1 - 1e-12):
            raise ValueError('fourth moment below squared second moment')
        if self.coefficients is not None and len(self.coefficients) != self.m_max + 1:
            raise ValueError(
                f'expected {self.m_max + 1} coefficients, got {len(self.coefficients)}'
            )
        return self

    @classmethod
    def for_noise(cls, noise: NoiseModel, m: int, theta: float, **kwargs: Any) -> 'UWindow':
        return cls(
            m=m,
            theta=theta,
            second_moment=noise.second_moment,
            fourth_moment=noise.fourth_moment,
            **kwargs,
        )

    def with_lags(self, l: int, q: Optional[int] = None) -> 'UWindow':  # noqa: E741
        data = self.model_dump()
        data.update(l=l, q=l if q is None else q)
        return UWindow.model_validate(data)


class MomentQuery(BaseModel):
    """A single moment identity to evaluate"""

    kind: MomentKind
    gap: int = Field(0, description='Index gap k - i', ge=0)
    window: UWindow

    model_config = ConfigDict(frozen=True)


class SchedulePoint(BaseModel):
    """One experiment size (n, theta_n, b_n, m(n))"""

    n: int = Field(description='Sample size', ge=1)
    theta: float = Field(description='theta_n', ge=0, lt=1)
    b: float = Field(description='Moderate deviation speed b_n', gt=1)
    m: int = Field(description='Truncation width m(n)', ge=2)

    model_config = ConfigDict(frozen=True)


class TruncationSpec(BaseModel):
    """Truncation level tau * sqrt(n) / b"""

    tau: float = Field(DEFAULT_TAU, description='Truncation constant tau', gt=0)
    n: int = Field(description='Sample size', ge=1)
    b: float = Field(description='Moderate deviation speed', gt=0)

    model_config = ConfigDict(frozen=True)

    @property
    def threshold(self) -> float:
        return self.tau * self.n**0.5 / self.b


class BlockDecomposition(BaseModel):
    """Big-block / small-block split of a sequence"""

    m: int = Field(description='Block width', ge=1)
    p: int = Field(description='Super-block factor', ge=2)
    n: int = Field(description='Sequence length', ge=1)
    l_count: int = Field(description='Number of complete Y blocks', ge=0)
    t_count: int = Field(description='Number of Z super-blocks', ge=0)
    y_blocks: np.ndarray = Field(description='Y_1..Y_l')
    z_blocks: np.ndarray = Field(description='Z_1..Z_t')
    leftovers: tuple[float, float, float] = Field(
        description='Trailing Y blocks, skipped Y blocks and the tail beyond l*m'
    )
    total: float = Field(description='Sum of the decomposed sequence')
    truncated_count: Optional[int] = Field(None, description='Entries zeroed by truncation')

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    def reassembled(self) -> float:
        return float(self.z_blocks.sum()) + sum(self.leftovers)

    def identity_residual(self) -> float:
        """Relative error of total = sum Z + leftovers."""
        scale = max(1.0, float(np.abs(self.y_blocks).sum()) + abs(self.leftovers[2]))
        return abs(self.total - self.reassembled()) / scale


class ConditionResult(BaseModel):
    """Value of one blocking condition at a schedule point"""

    name: str = Field(description='Condition label (A, B, C, D1, D2)')
    value: float = Field(description='Value of the condition expression')
    target: float = Field(description='Limit the expression should approach')
    threshold: float = Field(description='Tolerance around the target')
    status: str = Field(description="'ok', 'exceeds' or 'inconclusive'")
    method: str = Field(description="'exact', 'analytic' or 'monte-carlo'")
    ci_low: Optional[float] = Field(None, description='Lower confidence bound for MC values')
    ci_high: Optional[float] = Field(None, description='Upper confidence bound for MC values')


class ConditionReport(BaseModel):
    """All blocking conditions evaluated at one schedule point"""

    point: SchedulePoint
    l: int = Field(description='Lag of the U process', ge=0)  # noqa: E741
    p: Optional[int] = Field(None, description='Super-block factor, when feasible')
    results: list[ConditionResult]

    @property
    def inconclusive(self) -> bool:
        return any(result.status == 'inconclusive' for result in self.results)


class TailEstimate(BaseModel):
    """Monte Carlo tail probability with its Wilson interval and empirical rate"""

    r: float = Field(description='Threshold', gt=0)
    hits: int = Field(description='Replicates with statistic >= r', ge=0)
    replicates: int = Field(description='Replicates simulated', ge=1)
    p_hat: float = Field(description='hits / replicates', ge=0, le=1)
    ci_low: float = Field(description='95% Wilson lower bound', ge=0, le=1)
    ci_high: float = Field(description='95% Wilson upper bound', ge=0, le=1)
    empirical_rate: float = Field(description='-log(p_hat) / b^2', ge=0)
    theoretical_rate: float = Field(description='Limit rate I(r)', ge=0)
    lower_bound: bool = Field(False, description='True when zero hits made the rate a bound')

    @model_validator(mode='after')
    def _check_interval(self) -> 'TailEstimate':
        if not self.ci_low <= self.p_hat <= self.ci_high:
            raise ValueError('confidence interval does not contain p_hat')
        return self

    @property
    def well_estimated(self) -> bool:
        return self.hits > 0 and (self.ci_high - self.ci_low) < self.p_hat

    @property
    def rate_ratio(self) -> float:
        return self.empirical_rate / self.theoretical_rate


class RateCurve(BaseModel):
    """Tail estimates over an r grid at one schedule point"""

    point_id: int = Field(description='Index of the schedule point', ge=0)
    point: SchedulePoint
    kind: StatisticKind
    lag: int = Field(0, description='Covariance lag (covariance and approximant kinds)', ge=0)
    coefficients: Optional[tuple[float, ...]] = Field(None, description='Linear-combo weights')
    estimates: list[TailEstimate]

    @model_validator(mode='after')
    def _check_grid(self) -> 'RateCurve':
        grid = [estimate.r for estimate in self.estimates]
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError('r grid must be strictly increasing')
        return self

    def convergence_diagnostic(self) -> Optional[float]:
        """Worst |empirical/theoretical - 1| over well-estimated cells, or None."""
        cells = [abs(e.rate_ratio - 1) for e in self.estimates if e.well_estimated]
        return max(cells) if cells else None

    def band_cells(self, p_low: float = 1e-3, p_high: float = 1e-1) -> list[TailEstimate]:
        return [e for e in self.estimates if e.hits > 0 and p_low <= e.p_hat <= p_high]

    def to_rows(self) -> list[dict[str, Any]]:
        return [
            {
                'n': self.point.n,
                'theta': self.point.theta,
                'b': self.point.b,
                'm': self.point.m,
                'kind': self.kind.value,
                'r': e.r,
                'hits': e.hits,
                'replicates': e.replicates,
                'p_hat': e.p_hat,
                'ci_low': e.ci_low,
                'ci_high': e.ci_high,
                'empirical_rate': e.empirical_rate,
                'theoretical_rate': e.theoretical_rate,
            }
            for e in self.estimates
        ]


class CltReport(BaseModel):
    """Kolmogorov-Smirnov comparison of standardized LS errors with N(0, 1)"""

    theta: float
    n: int
    replicates: int
    ks_statistic: float = Field(description='Sup distance to the standard normal CDF', ge=0)
    p_value: float = Field(description='Asymptotic KS p-value', ge=0, le=1)
    n_one_minus_theta: float = Field(description='n(1 - theta), should be large')
    mean: float = Field(0.0, description='Mean standardized error (finite-n bias)')
    low_power: bool = Field(description='Too few replicates for a meaningful KS test')


class RunStats(BaseModel):
    """Pydantic model representing Monte Carlo engine statistics"""

    replicates_simulated: int = Field(0, description='Total replicate paths simulated')
    batches: int = Field(0, description='Replicate batches dispatched')
    wall_time: float = Field(0.0, description='Seconds spent computing statistics')
    workers: int = Field(1, description='Worker processes used')
    zero_hit_cells: int = Field(0, description='Tail cells reported as one-sided bounds')
