"""
Experiment configuration.

Sources, lowest precedence first: built-in defaults, global defaults set with
``configure``, a YAML file, the ``UNITROOTMDP_SEED`` environment variable
(master seed only) and finally command-line flags through ``with_options``.
"""

import hashlib
import json
import logging
import os
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .exceptions import ConfigurationError
from .mdpcore import M_EXPONENT_RANGE, Schedule, make_schedule, make_schedule_from_points
from .models import (
    DEFAULT_ALPHA0,
    DEFAULT_BETA0,
    DEFAULT_CONDITION_B_M,
    DEFAULT_EPS_INIT,
    DEFAULT_GAMMA_DEP,
    DEFAULT_M_EXPONENT,
    DEFAULT_TAU,
    ENUMERATION_GUARD,
    IDENTITY_TOLERANCE,
    InitPolicy,
    NoiseKind,
    NoiseModel,
    SchedulePoint,
    StatisticKind,
)
from .umoments import DEFAULT_BLOCK_GUARD

logger = logging.getLogger(__name__)

SEED_ENV_VAR = 'UNITROOTMDP_SEED'
RUN_ID_LENGTH = 12  # Hex digits of the SHA-256 config digest
# Fields that change how a run executes but not what it computes
EXECUTION_FIELDS = {'workers', 'output_dir'}


class NoiseSpec(BaseModel):
    """Noise law as written in a config file"""

    kind: NoiseKind = Field(NoiseKind.NORMAL, description='Law of the driving noise')
    sigma: float = Field(1.0, description='Normal standard deviation', gt=0)
    half_width: float = Field(1.0, description='Uniform half-width', gt=0)
    support: list[float] = Field(default_factory=list, description='Discrete support points')
    probabilities: list[Union[str, float]] = Field(
        default_factory=list, description="Discrete probabilities, e.g. '1/4'"
    )

    model_config = ConfigDict(extra='forbid')

    def build(self) -> NoiseModel:
        return NoiseModel(
            kind=self.kind,
            sigma=self.sigma,
            half_width=self.half_width,
            support=tuple(self.support),
            probabilities=tuple(self.probabilities),
        )


class ScheduleSpec(BaseModel):
    """Power-law schedule parameters or an explicit point list"""

    beta: Optional[float] = Field(0.15, description='theta_n = 1 - n^(-beta)', gt=0)
    gamma_b: Optional[float] = Field(0.05, description='b_n = n^(gamma_b)', gt=0)
    n_values: list[int] = Field(
        default_factory=lambda: [10_000, 50_000, 200_000], description='Sample sizes'
    )
    m_exponent: float = Field(
        DEFAULT_M_EXPONENT,
        description='m = ceil((1 - theta)^(-exponent))',
        gt=M_EXPONENT_RANGE[0],
        lt=M_EXPONENT_RANGE[1],
    )
    points: Optional[list[SchedulePoint]] = Field(
        None, description='Explicit (n, theta, b, m) points; overrides the power law'
    )

    model_config = ConfigDict(extra='forbid')

    @model_validator(mode='after')
    def _check_source(self) -> 'ScheduleSpec':
        if self.points is None and (self.beta is None or self.gamma_b is None):
            raise ValueError('schedule needs beta and gamma_b, or explicit points')
        if self.points is None and not self.n_values:
            raise ValueError('schedule needs at least one n value')
        return self


class BlockingSpec(BaseModel):
    """Constants of the blocking argument and its checks"""

    tau: float = Field(DEFAULT_TAU, description='Truncation constant', gt=0)
    alpha0: float = Field(DEFAULT_ALPHA0, description='Maximal inequality alpha0', gt=0)
    beta0: float = Field(DEFAULT_BETA0, description='Maximal inequality beta0', gt=0)
    gamma_dep: float = Field(DEFAULT_GAMMA_DEP, description='gamma of condition (A)', gt=0, lt=1)
    condition_b_m: float = Field(DEFAULT_CONDITION_B_M, description='M of condition (B)', gt=0)
    epsilon: float = Field(1.0, description='epsilon of condition (C)', gt=0)
    tolerance: float = Field(0.1, description='Threshold separating ok from exceeds', gt=0)
    condition_replicates: int = Field(
        20_000, description='Monte Carlo draws for conditions (B) and (C)', ge=2
    )
    falsify_n: int = Field(10_000, description='Length of the W-sums in the maximal check', ge=1)
    falsify_p: int = Field(1, description='Lag p of W_{k,p} = xi_k xi_{k-p}', ge=1)
    t_values: list[float] = Field(
        default_factory=lambda: [250.0, 500.0, 1000.0], description='Thresholds t'
    )
    falsify_replicates: int = Field(0, description='Maximal check replicates (0 disables)', ge=0)
    negligibility_replicates: int = Field(
        0, description='Boundary and approximation-gap replicates (0 disables)', ge=0
    )
    negligibility_r: float = Field(0.5, description='Threshold r of the negligibility runs', gt=0)
    variance_replicates: int = Field(
        0, description='Monte Carlo cross-check of the block variance (0 disables)', ge=0
    )

    model_config = ConfigDict(extra='forbid')


class SimulationSpec(BaseModel):
    """Paths written by the simulate and estimate commands"""

    theta: float = Field(0.9, description='Autoregressive coefficient', ge=0, lt=1)
    n: int = Field(100, description='Path length', ge=2)
    count: int = Field(1, description='Number of paths', ge=1)

    model_config = ConfigDict(extra='forbid')


class CltSpec(BaseModel):
    """Parameters of the Kolmogorov-Smirnov CLT check"""

    theta: float = Field(0.99, description='Autoregressive coefficient', ge=0, lt=1)
    n: int = Field(10_000, description='Path length', ge=2)
    replicates: int = Field(10_000, description='Replicate paths', ge=2)

    model_config = ConfigDict(extra='forbid')


class VerifySpec(BaseModel):
    """Closed-form versus enumeration sweep"""

    laws: list[NoiseSpec] = Field(
        default_factory=lambda: [
            NoiseSpec(kind=NoiseKind.RADEMACHER),
            NoiseSpec(
                kind=NoiseKind.DISCRETE,
                support=[-1.0, 0.0, 1.0],
                probabilities=['1/4', '1/2', '1/4'],
            ),
        ],
        description='Finite-support laws to enumerate',
    )
    m_max_values: list[int] = Field(default_factory=lambda: [1, 2], description='M values')
    m_offsets: list[int] = Field(
        default_factory=lambda: [1, 2, 3, 4, 5, 6], description='m - 2M values'
    )
    thetas: list[float] = Field(
        default_factory=lambda: [0.0, 0.3, 0.7, 0.9], description='theta values'
    )
    tolerance: float = Field(IDENTITY_TOLERANCE, description='Largest accepted |diff|', gt=0)
    guard: int = Field(ENUMERATION_GUARD, description='Largest pair-moment enumeration', ge=1)
    block_guard: int = Field(DEFAULT_BLOCK_GUARD, description='Largest block enumeration', ge=1)

    model_config = ConfigDict(extra='forbid')


class ExperimentConfig(BaseModel):
    """Fully resolved configuration of one run"""

    noise: NoiseSpec = Field(default_factory=NoiseSpec)
    schedule: ScheduleSpec = Field(default_factory=ScheduleSpec)
    blocking: BlockingSpec = Field(default_factory=BlockingSpec)
    simulation: SimulationSpec = Field(default_factory=SimulationSpec)
    clt: CltSpec = Field(default_factory=CltSpec)
    verify: VerifySpec = Field(default_factory=VerifySpec)
    m_max: Optional[int] = Field(
        None, description='Largest covariance lag M (default: the largest lag the run uses)', ge=0
    )
    lags: list[int] = Field(
        default_factory=lambda: [0, 1], description='Covariance lags', min_length=1
    )
    coefficients: Optional[list[float]] = Field(
        None, description='Linear-combination weights a_0..a_M'
    )
    kind: StatisticKind = Field(StatisticKind.COVARIANCE, description='Statistic of the curve run')
    r_grid: list[float] = Field(
        default_factory=lambda: [0.5, 1.0, 1.5], description='Thresholds r', min_length=1
    )
    replicates: int = Field(1000, description='Replicates per schedule point', ge=1)
    master_seed: int = Field(0, description='Master seed of every random stream', ge=0)
    init_policy: InitPolicy = Field(InitPolicy.TRUNCATED_SERIES, description='Stationary start')
    eps_init: float = Field(DEFAULT_EPS_INIT, description='Truncated-series bias', gt=0, lt=1)
    workers: int = Field(
        default_factory=lambda: os.cpu_count() or 1, description='Worker processes', ge=1
    )
    output_dir: Path = Field(Path('results'), description='Directory receiving CSV and JSON')

    model_config = ConfigDict(extra='forbid')

    @model_validator(mode='after')
    def _check_references(self) -> 'ExperimentConfig':
        bound = self.lag_bound()
        if any(lag < 0 or lag > bound for lag in self.lags):
            raise ValueError(f'lags {self.lags} must lie in [0, {bound}]')
        if self.coefficients is not None and len(self.coefficients) != bound + 1:
            raise ValueError(
                f'coefficients need {bound + 1} entries (a_0..a_M), '
                f'got {len(self.coefficients)}'
            )
        if self.kind == StatisticKind.LINEAR and self.coefficients is None:
            raise ValueError('kind linear needs coefficients')
        if any(r <= 0 for r in self.r_grid):
            raise ValueError('r_grid values must be positive')
        if len(set(self.r_grid)) != len(self.r_grid):
            raise ValueError('r_grid values must be distinct')
        if self.init_policy == InitPolicy.EXACT_GAUSSIAN and self.noise.kind != NoiseKind.NORMAL:
            raise ValueError('exact-gaussian init requires normal noise')
        return self

    def with_options(self, **overrides: Any) -> 'ExperimentConfig':
        """
        Validated copy with the non-None overrides applied.

        Example:
            ```python
            config = load_config('run.yaml').with_options(master_seed=7, workers=None)
            ```
        """
        data = self.model_dump()
        data.update({key: value for key, value in overrides.items() if value is not None})
        return ExperimentConfig.model_validate(data)

    def noise_model(self) -> NoiseModel:
        return self.noise.build()

    def lag_bound(self) -> int:
        """
        Largest lag M of the run: m_max when set, otherwise the largest lag the statistic
        touches (len(coefficients) - 1 for linear combinations, at least 1 for the rest).
        """
        if self.m_max is not None:
            return self.m_max
        if self.kind == StatisticKind.LINEAR and self.coefficients:
            return len(self.coefficients) - 1
        return max([1, *self.lags])

    def build_schedule(self) -> Schedule:
        """
        Raises:
            ScheduleInvalidError: If the power-law exponents break a growth condition
        """
        gamma_dep = self.blocking.gamma_dep
        if self.schedule.points is not None:
            return make_schedule_from_points(self.schedule.points, gamma_dep, self.lag_bound())
        return make_schedule(
            self.schedule.beta,
            self.schedule.gamma_b,
            self.schedule.n_values,
            m_exponent=self.schedule.m_exponent,
            gamma_dep=gamma_dep,
            m_max=self.lag_bound(),
        )

    def run_id(self) -> str:
        """First 12 hex digits of SHA-256 over the canonical JSON of the computed-on fields."""
        payload = self.model_dump(mode='json', exclude=EXECUTION_FIELDS)
        canonical = json.dumps(payload, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode()).hexdigest()[:RUN_ID_LENGTH]


# Global configuration
_global_config = ExperimentConfig()


def configure(**overrides: Any) -> None:
    """
    Set default configuration values for every later ``load_config`` call.

    Example:
        ```python
        from unitrootmdp.config import configure

        configure(master_seed=11, replicates=5000)
        ```

    Raises:
        ConfigurationError: If the overrides do not validate
    """
    global _global_config

    try:
        _global_config = _global_config.with_options(**overrides)
    except ValidationError as exc:
        raise ConfigurationError(str(exc)) from exc


def get_global_config() -> ExperimentConfig:
    return _global_config.model_copy(deep=True)


def reset_global_config() -> None:
    global _global_config
    _global_config = ExperimentConfig()


def _merge(base: dict[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(
    path: Optional[Union[str, Path]] = None, environ: Optional[Mapping[str, str]] = None
) -> ExperimentConfig:
    """
    Resolve the configuration from global defaults, a YAML file and the environment.

    Args:
        path: YAML file whose keys override the global defaults (nested mappings merge)
        environ: Environment to read the seed override from (defaults to os.environ)

    Raises:
        ConfigurationError: If the file is unreadable, not a mapping, or fails validation
    """
    environ = os.environ if environ is None else environ
    data = _global_config.model_dump()
    if path is not None:
        try:
            with open(path, encoding='utf-8') as handle:
                loaded = yaml.safe_load(handle) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigurationError(f'cannot read config {path}: {exc}') from exc
        if not isinstance(loaded, Mapping):
            raise ConfigurationError(
                f'config {path} must be a mapping, got {type(loaded).__name__}'
            )
        data = _merge(data, loaded)

    seed = environ.get(SEED_ENV_VAR)
    if seed is not None:
        try:
            data['master_seed'] = int(seed)
        except ValueError as exc:
            raise ConfigurationError(f'{SEED_ENV_VAR} must be an integer, got {seed!r}') from exc
        logger.info(f'master seed {seed} taken from {SEED_ENV_VAR}')

    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(str(exc)) from exc
