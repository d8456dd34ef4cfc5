"""
Parallel Monte Carlo engine: MDP tail probabilities, empirical rate curves,
the CLT check and the variance / negligibility sweeps.

Replicate r of schedule point e always draws from stream (master_seed, e, r),
so every table is bit-identical for any worker count.
"""

import logging
import math
import time
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy import signal, stats

from . import ar1, noise
from .blocking import estimator_approx_gap, exponential_approx_gap
from .estimators import (
    empirical_covariance,
    ls_estimate,
    theoretical_covariance,
    u_combine,
    yw_estimate,
)
from .mdpcore import RateFunction, Schedule, scaled_covariance_deviation, scaled_estimator_deviation
from .models import (
    DEFAULT_EPS_INIT,
    DEFAULT_SCHEDULE_M_MAX,
    LOW_POWER_REPLICATES,
    CltReport,
    InitPolicy,
    NoiseModel,
    RateCurve,
    RunStats,
    SamplePath,
    SchedulePoint,
    StatisticKind,
    TailEstimate,
    UWindow,
)
from .umoments import block_variance_exact, u_values
from .utils import stream_rng, wilson_interval

logger = logging.getLogger(__name__)

# Replicates simulated per dispatched batch
DEFAULT_BATCH_SIZE = 256
# Auxiliary statistics evaluated by the negligibility and CLT runs
BOUNDARY = 'boundary'
APPROX_GAP = 'approx-gap'
ESTIMATOR_GAP = 'estimator-gap'
STANDARDIZED_LS = 'standardized-ls'

StatisticName = Union[StatisticKind, str]


class BatchTask(BaseModel):
    """A contiguous replicate range of one statistic at one point"""

    statistic: str
    point_id: int
    start: int
    stop: int
    theta: float
    n: int
    b: float = 1.0
    m: int = 2
    lag: int = 0
    coefficients: Optional[tuple[float, ...]] = None
    model: NoiseModel
    master_seed: int
    init_policy: InitPolicy
    eps_init: float
    m_max: int

    model_config = ConfigDict(frozen=True)

    @property
    def history(self) -> int:
        if self.statistic in (StatisticKind.APPROXIMANT.value, APPROX_GAP, ESTIMATOR_GAP):
            return self.m
        return 0

    def window(self) -> UWindow:
        return UWindow.for_noise(self.model, self.m, self.theta, l=self.lag, m_max=self.m_max)


def _covariance(path: SamplePath, task: BatchTask) -> float:
    s2 = task.model.second_moment
    empirical = empirical_covariance(path, task.lag)
    theoretical = theoretical_covariance(path.theta, task.lag, s2)
    return scaled_covariance_deviation(empirical, theoretical, path.theta, path.n, task.lag, task.b)


def _linear(path: SamplePath, task: BatchTask) -> float:
    s2 = task.model.second_moment
    combined = 0.0
    for lag, weight in enumerate(task.coefficients):
        deviation = empirical_covariance(path, lag) - theoretical_covariance(path.theta, lag, s2)
        combined += weight * deviation
    return scaled_covariance_deviation(combined, 0.0, path.theta, path.n, 0, task.b)


def _estimator_ls(path: SamplePath, task: BatchTask) -> float:
    return scaled_estimator_deviation(ls_estimate(path), path.theta, path.n, task.b)


def _estimator_yw(path: SamplePath, task: BatchTask) -> float:
    return scaled_estimator_deviation(yw_estimate(path), path.theta, path.n, task.b)


def _approximant(path: SamplePath, task: BatchTask) -> float:
    """sqrt(1-theta^2) / (b sqrt(n-l)) |sum_k U_{k,l,m}|."""
    total = float(np.sum(u_values(path, task.window())))
    return math.sqrt(1.0 - path.theta**2) / (task.b * math.sqrt(path.n - task.lag)) * abs(total)


def _boundary(path: SamplePath, task: BatchTask) -> float:
    """sqrt(1-theta^2) |Z_0 - Z_{n-l}| / (b sqrt(n-l)); the centering C cancels."""
    n, lag, states = path.n, task.lag, path.states
    difference = states[lag] * states[0] - states[n] * states[n - lag]
    return math.sqrt(1.0 - path.theta**2) * abs(float(difference)) / (task.b * math.sqrt(n - lag))


def _approx_gap(path: SamplePath, task: BatchTask) -> float:
    return exponential_approx_gap(path, task.window(), task.b)


def _estimator_gap(path: SamplePath, task: BatchTask) -> float:
    return estimator_approx_gap(path, task.m, task.b, task.model.second_moment)


def _standardized_ls(path: SamplePath, task: BatchTask) -> float:
    """(1-theta^2)^(-1/2) sqrt(n) (theta_hat - theta), signed."""
    return math.sqrt(path.n) * (ls_estimate(path) - path.theta) / math.sqrt(1.0 - path.theta**2)


STATISTICS: dict[str, Callable[[SamplePath, BatchTask], float]] = {
    StatisticKind.COVARIANCE.value: _covariance,
    StatisticKind.LINEAR.value: _linear,
    StatisticKind.ESTIMATOR_LS.value: _estimator_ls,
    StatisticKind.ESTIMATOR_YW.value: _estimator_yw,
    StatisticKind.APPROXIMANT.value: _approximant,
    BOUNDARY: _boundary,
    APPROX_GAP: _approx_gap,
    ESTIMATOR_GAP: _estimator_gap,
    STANDARDIZED_LS: _standardized_ls,
}


def run_batch(task: BatchTask) -> np.ndarray:
    """Statistic values for replicates task.start..task.stop-1 (worker entry point)."""
    function = STATISTICS[task.statistic]
    values = np.empty(task.stop - task.start)
    for offset, replicate in enumerate(range(task.start, task.stop)):
        path = ar1.simulate(
            task.theta,
            task.n,
            task.model,
            stream_rng(task.master_seed, task.point_id, replicate),
            init=task.init_policy,
            eps_init=task.eps_init,
            history=task.history,
        )
        values[offset] = function(path, task)
    logger.debug(f'{task.statistic} point {task.point_id} replicates {task.start}..{task.stop - 1}')
    return values


def estimator_decomposition(
    path: SamplePath, second_moment: float, b: float = 1.0
) -> tuple[float, float]:
    """
    Numerator and denominator of the scaled least-squares error.

    Returns:
        (r_n, R_n) with r_n = sqrt(1-theta^2) / (b sqrt(n) E xi^2) sum X_{k-1} xi_k and
        R_n = (1-theta^2) / (n E xi^2) sum X_{k-1}^2, so r_n / R_n equals
        sqrt(n) (theta_hat - theta) / (b sqrt(1-theta^2)) and R_n -> 1
    """
    theta, n = path.theta, path.n
    lagged = path.states[:-1]
    numerator = float(np.dot(lagged, path.xi_range(1, n)))
    denominator = float(np.dot(lagged, lagged))
    r_n = math.sqrt(1.0 - theta * theta) / (b * math.sqrt(n) * second_moment) * numerator
    big_r_n = (1.0 - theta * theta) / (n * second_moment) * denominator
    return r_n, big_r_n


def _kind_value(statistic: StatisticName) -> str:
    return statistic.value if isinstance(statistic, StatisticKind) else statistic


class MonteCarloEngine:
    """
    Runs replicate simulations for one noise law and master seed.

    Example:
        ```python
        engine = MonteCarloEngine(NoiseModel.normal(), master_seed=7, workers=4)
        curves = engine.rate_curve(StatisticKind.COVARIANCE, schedule, [0.5, 1.0, 1.5], 10_000)
        ```
    """

    def __init__(
        self,
        model: NoiseModel,
        master_seed: int = 0,
        workers: int = 1,
        init_policy: InitPolicy = InitPolicy.TRUNCATED_SERIES,
        eps_init: float = DEFAULT_EPS_INIT,
        m_max: int = DEFAULT_SCHEDULE_M_MAX,
        batch_size: int = DEFAULT_BATCH_SIZE,
    ):
        if workers < 1:
            raise ValueError(f'workers must be positive, got {workers}')
        if batch_size < 1:
            raise ValueError(f'batch_size must be positive, got {batch_size}')
        self.model = model
        self.master_seed = master_seed
        self.workers = workers
        self.init_policy = init_policy
        self.eps_init = eps_init
        self.m_max = m_max
        self.batch_size = batch_size
        self.stats = RunStats(workers=workers)

    def _tasks(
        self,
        statistic: StatisticName,
        point_id: int,
        replicates: int,
        theta: float,
        n: int,
        **fields,
    ) -> list[BatchTask]:
        return [
            BatchTask(
                statistic=_kind_value(statistic),
                point_id=point_id,
                start=start,
                stop=min(start + self.batch_size, replicates),
                theta=theta,
                n=n,
                model=self.model,
                master_seed=self.master_seed,
                init_policy=self.init_policy,
                eps_init=self.eps_init,
                m_max=self.m_max,
                **fields,
            )
            for start in range(0, replicates, self.batch_size)
        ]

    def _run(self, tasks: list[BatchTask]) -> np.ndarray:
        started = time.perf_counter()
        if self.workers == 1 or len(tasks) == 1:
            results = [run_batch(task) for task in tasks]
        else:
            with ProcessPoolExecutor(max_workers=self.workers) as executor:
                results = list(executor.map(run_batch, tasks))
        values = np.concatenate(results) if results else np.empty(0)
        self.stats.replicates_simulated += values.size
        self.stats.batches += len(tasks)
        self.stats.wall_time += time.perf_counter() - started
        return values

    def statistics(
        self,
        kind: StatisticName,
        point: SchedulePoint,
        point_id: int,
        replicates: int,
        lag: int = 0,
        coefficients: Optional[Sequence[float]] = None,
    ) -> np.ndarray:
        """
        MDP-scaled statistic for replicates 0..replicates-1 at one schedule point.

        Raises:
            ValueError: If the linear kind has no coefficients
        """
        if replicates < 1:
            raise ValueError(f'replicates must be positive, got {replicates}')
        if _kind_value(kind) == StatisticKind.LINEAR.value and not coefficients:
            raise ValueError('linear statistic needs coefficients')
        tasks = self._tasks(
            kind,
            point_id,
            replicates,
            point.theta,
            point.n,
            b=point.b,
            m=point.m,
            lag=lag,
            coefficients=tuple(coefficients) if coefficients else None,
        )
        return self._run(tasks)

    def tail_estimate(
        self, values: np.ndarray, r: float, b: float, theoretical_rate: float
    ) -> TailEstimate:
        """Threshold precomputed statistic values at r."""
        replicates = values.size
        hits = int(np.count_nonzero(values >= r))
        low, high = wilson_interval(hits, replicates)
        p_hat = hits / replicates
        lower_bound = hits == 0
        if lower_bound:
            self.stats.zero_hit_cells += 1
            empirical_rate = -math.log(1.0 / replicates) / (b * b)
        else:
            empirical_rate = max(0.0, -math.log(p_hat) / (b * b))
        return TailEstimate(
            r=r,
            hits=hits,
            replicates=replicates,
            p_hat=p_hat,
            ci_low=low,
            ci_high=high,
            empirical_rate=empirical_rate,
            theoretical_rate=theoretical_rate,
            lower_bound=lower_bound,
        )

    def tail_probability(
        self,
        kind: StatisticKind,
        point: SchedulePoint,
        r: float,
        replicates: int,
        lag: int = 0,
        coefficients: Optional[Sequence[float]] = None,
        point_id: int = 0,
    ) -> TailEstimate:
        """
        Estimate P(scaled statistic >= r) with its Wilson interval.

        Raises:
            DegenerateRateError: If linear coefficients sum to zero
        """
        rate = RateFunction.for_statistic(kind, self.model.second_moment, coefficients)
        values = self.statistics(kind, point, point_id, replicates, lag, coefficients)
        return self.tail_estimate(values, r, point.b, rate(r))

    def rate_curve(
        self,
        kind: StatisticKind,
        schedule: Schedule,
        r_grid: Sequence[float],
        replicates: int,
        lag: int = 0,
        coefficients: Optional[Sequence[float]] = None,
    ) -> list[RateCurve]:
        """
        One RateCurve per schedule point; every r is thresholded on the same replicates.

        Raises:
            ValueError: If the schedule has fewer than two points
            DegenerateRateError: If linear coefficients sum to zero
        """
        if len(schedule.points) < 2:
            raise ValueError('rate curves need at least two schedule points')
        grid = sorted(r_grid)
        rate = RateFunction.for_statistic(kind, self.model.second_moment, coefficients)
        curves = []
        for point_id, point in enumerate(schedule.points):
            values = self.statistics(kind, point, point_id, replicates, lag, coefficients)
            curve = RateCurve(
                point_id=point_id,
                point=point,
                kind=kind,
                lag=lag,
                coefficients=tuple(coefficients) if coefficients else None,
                estimates=[self.tail_estimate(values, r, point.b, rate(r)) for r in grid],
            )
            logger.info(
                f'{kind.value} curve at n={point.n}: diagnostic {curve.convergence_diagnostic()}'
            )
            curves.append(curve)
        return curves

    def clt_check(self, theta: float, n: int, replicates: int) -> CltReport:
        """Kolmogorov-Smirnov distance of standardized LS errors from N(0, 1)."""
        tasks = self._tasks(STANDARDIZED_LS, 0, replicates, theta, n)
        values = self._run(tasks)
        result = stats.kstest(values, 'norm')
        low_power = replicates < LOW_POWER_REPLICATES
        if low_power:
            logger.warning(f'KS check with {replicates} replicates has low power')
        report = CltReport(
            theta=theta,
            n=n,
            replicates=replicates,
            ks_statistic=float(result.statistic),
            p_value=float(result.pvalue),
            n_one_minus_theta=n * (1.0 - theta),
            mean=float(np.mean(values)),
            low_power=low_power,
        )
        logger.info(f'clt theta={theta} n={n}: KS {report.ks_statistic:.4f}')
        return report

    def variance_convergence(
        self, schedule: Schedule, l: int, replicates: int = 0  # noqa: E741
    ) -> pd.DataFrame:
        """
        (1-theta^2)/m Var(U_1 + ... + U_m) per point, exact and optionally by Monte Carlo.

        Columns: n, theta, m, l, exact, limit, relative_gap, mc, mc_stderr. The mc columns
        are NaN unless replicates > 1; ``blocks check`` takes the count from
        ``blocking.variance_replicates`` (0 by default).
        """
        limit = 4.0 * self.model.second_moment**2
        rows = []
        for point_id, point in enumerate(schedule.points):
            window = UWindow.for_noise(self.model, point.m, point.theta, l=l, m_max=schedule.m_max)
            scale = (1.0 - point.theta**2) / point.m
            exact = scale * block_variance_exact(l, window)
            mc, stderr = math.nan, math.nan
            if replicates > 1:
                sums = _block_sum_draws(window, self.model, replicates, self.master_seed, point_id)
                squares = (sums - sums.mean()) ** 2
                mc = scale * float(squares.sum()) / (replicates - 1)
                stderr = scale * float(squares.std(ddof=1)) / math.sqrt(replicates)
            rows.append(
                {
                    'n': point.n,
                    'theta': point.theta,
                    'm': point.m,
                    'l': l,
                    'exact': exact,
                    'limit': limit,
                    'relative_gap': abs(exact / limit - 1.0),
                    'mc': mc,
                    'mc_stderr': stderr,
                }
            )
        return pd.DataFrame(rows)

    def _decay_table(
        self, statistic: str, schedule: Schedule, l: int, r: float, replicates: int  # noqa: E741
    ) -> pd.DataFrame:
        rows = []
        for point_id, point in enumerate(schedule.points):
            values = self.statistics(statistic, point, point_id, replicates, lag=l)
            estimate = self.tail_estimate(values, r, point.b, 0.0)
            rows.append(
                {
                    'n': point.n,
                    'theta': point.theta,
                    'b': point.b,
                    'm': point.m,
                    'r': r,
                    'hits': estimate.hits,
                    'replicates': estimate.replicates,
                    'p_hat': estimate.p_hat,
                    'ci_low': estimate.ci_low,
                    'ci_high': estimate.ci_high,
                    'decay': estimate.empirical_rate,
                    'lower_bound': estimate.lower_bound,
                }
            )
        table = pd.DataFrame(rows)
        decays = table['decay'].tolist()
        all_zero = bool(table['lower_bound'].all())
        if not all_zero and not all(b > a for a, b in zip(decays, decays[1:])):
            logger.warning(f'{statistic} decay -log(p)/b^2 is not increasing over the schedule')
        return table

    def boundary_negligibility(
        self, schedule: Schedule, l: int, replicates: int, r: float = 0.5  # noqa: E741
    ) -> pd.DataFrame:
        """Tail of sqrt(1-theta^2) |Z_0 - Z_{n-l}| / (b sqrt(n-l)) at r per point."""
        return self._decay_table(BOUNDARY, schedule, l, r, replicates)

    def approximation_negligibility(
        self,
        schedule: Schedule,
        l: int,  # noqa: E741
        replicates: int,
        r: float = 0.5,
        estimator: bool = False,
    ) -> pd.DataFrame:
        """Tail of the exponential-approximation gap (or the estimator X-hat gap) at r per point."""
        statistic = ESTIMATOR_GAP if estimator else APPROX_GAP
        return self._decay_table(statistic, schedule, l, r, replicates)


def _block_sum_draws(
    window: UWindow, model: NoiseModel, replicates: int, master_seed: int, point_id: int
) -> np.ndarray:
    """Draws of U_{1,l,m} + ... + U_{m,l,m} from noise xi_{2-m}, ..., xi_{m+l}."""
    m, l, theta = window.m, window.l, window.theta  # noqa: E741
    width = 2 * m + l - 1
    taps = theta ** np.arange(m - 1, dtype=np.float64)
    sums = []
    for batch, start in enumerate(range(0, replicates, DEFAULT_BATCH_SIZE)):
        rows = min(DEFAULT_BATCH_SIZE, replicates - start)
        # four-part keys never collide with the (seed, point, replicate) path streams
        stream = stream_rng(master_seed, point_id, batch, 0)
        values = noise.sample(model, rows * width, stream).reshape(rows, width)
        # column c holds xi_{c + 2 - m}; states[:, i] = X_{i,m} for i = 0..m+l
        states = signal.fftconvolve(values, taps[None, :], mode='valid', axes=1)
        xi_k = values[:, m - 1 : 2 * m - 1]
        xi_kl = values[:, m - 1 + l : 2 * m - 1 + l]
        u = u_combine(
            theta, states[:, l : l + m], xi_k, xi_kl, states[:, :m], l, window.second_moment
        )
        sums.append(u.sum(axis=1))
    return np.concatenate(sums)


def tail_probability(
    kind: StatisticKind,
    point: SchedulePoint,
    r: float,
    model: NoiseModel,
    replicates: int,
    master_seed: int = 0,
    lag: int = 0,
    coefficients: Optional[Sequence[float]] = None,
    workers: int = 1,
) -> TailEstimate:
    engine = MonteCarloEngine(model, master_seed, workers)
    return engine.tail_probability(kind, point, r, replicates, lag, coefficients)


def rate_curve(
    kind: StatisticKind,
    schedule: Schedule,
    r_grid: Sequence[float],
    model: NoiseModel,
    replicates: int,
    master_seed: int = 0,
    lag: int = 0,
    coefficients: Optional[Sequence[float]] = None,
    workers: int = 1,
) -> list[RateCurve]:
    engine = MonteCarloEngine(model, master_seed, workers, m_max=schedule.m_max)
    return engine.rate_curve(kind, schedule, r_grid, replicates, lag, coefficients)


def clt_check(
    theta: float, n: int, replicates: int, master_seed: int = 0, model: Optional[NoiseModel] = None
) -> CltReport:
    engine = MonteCarloEngine(model or NoiseModel.normal(), master_seed)
    return engine.clt_check(theta, n, replicates)


def variance_convergence(
    schedule: Schedule,
    l: int,  # noqa: E741
    model: NoiseModel,
    replicates: int = 0,
    master_seed: int = 0,
) -> pd.DataFrame:
    engine = MonteCarloEngine(model, master_seed, m_max=schedule.m_max)
    return engine.variance_convergence(schedule, l, replicates)


def boundary_negligibility(
    schedule: Schedule,
    l: int,  # noqa: E741
    model: NoiseModel,
    replicates: int,
    r: float = 0.5,
    master_seed: int = 0,
    workers: int = 1,
) -> pd.DataFrame:
    engine = MonteCarloEngine(model, master_seed, workers, m_max=schedule.m_max)
    return engine.boundary_negligibility(schedule, l, replicates, r)
