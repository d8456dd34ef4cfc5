"""
Stationary AR(1) simulation X_k = theta X_{k-1} + xi_k and m-truncated states.
"""

import logging
import math
from collections.abc import Iterator

import numpy as np
import pandas as pd
from scipy import signal

from . import noise
from .exceptions import ConfigurationError
from .models import DEFAULT_EPS_INIT, InitPolicy, NoiseKind, NoiseModel, SamplePath
from .utils import stream_rng

logger = logging.getLogger(__name__)


def _check_theta(theta: float) -> None:
    if not 0 <= theta < 1:
        raise ValueError(f'theta must lie in [0, 1), got {theta}')


def series_horizon(theta: float, eps_init: float = DEFAULT_EPS_INIT) -> int:
    """Smallest H with theta^H <= eps_init (1 when theta = 0)."""
    _check_theta(theta)
    if not 0 < eps_init < 1:
        raise ValueError(f'eps_init must lie in (0, 1), got {eps_init}')
    if theta == 0:
        return 1
    return max(1, math.ceil(math.log(eps_init) / math.log(theta)))


def stationary_variance(theta: float, second_moment: float) -> float:
    """E X_0^2 = E xi^2 / (1 - theta^2)."""
    _check_theta(theta)
    return second_moment / (1.0 - theta * theta)


def stationary_solution(theta: float, noise_window: np.ndarray) -> float:
    """
    Moving-average value sum_p theta^p xi_{k-p} over a noise window.

    Args:
        theta: Autoregressive coefficient
        noise_window: xi_{k-N+1}, ..., xi_k, oldest first

    Returns:
        The truncated stationary solution at time k
    """
    _check_theta(theta)
    return float(np.polyval(np.asarray(noise_window, dtype=np.float64), theta))


def simulate(
    theta: float,
    n: int,
    model: NoiseModel,
    stream: np.random.Generator,
    init: InitPolicy = InitPolicy.TRUNCATED_SERIES,
    eps_init: float = DEFAULT_EPS_INIT,
    history: int = 0,
) -> SamplePath:
    """
    Simulate a stationary-start path X_0..X_n.

    Args:
        theta: Autoregressive coefficient in [0, 1)
        n: Path length
        model: Noise law
        stream: Random stream owned by this replicate
        init: Stationary start policy
        eps_init: Bias tolerance of the truncated-series start
        history: Minimum number of noise values at indices <= 0 to retain

    Returns:
        An immutable SamplePath

    Raises:
        ConfigurationError: If an exact Gaussian start is requested for non-normal noise
    """
    _check_theta(theta)
    if n < 1:
        raise ValueError(f'n must be positive, got {n}')
    if history < 0:
        raise ValueError(f'history must be non-negative, got {history}')

    if init == InitPolicy.TRUNCATED_SERIES:
        horizon = series_horizon(theta, eps_init)
        retained = max(horizon, history)
        xi = noise.sample(model, retained + n, stream)
        # The filter started from rest realizes X_0 as the series cut at `retained` terms.
        full = signal.lfilter([1.0], [1.0, -theta], xi)
        states = np.array(full[retained - 1 :], dtype=np.float64)
    else:
        if model.kind != NoiseKind.NORMAL:
            raise ConfigurationError(
                f'exact-gaussian start requires normal noise, got {model.kind.value}'
            )
        horizon = None
        retained = history
        past = noise.sample(model, retained, stream) if retained else np.empty(0)
        partial = stationary_solution(theta, past) if retained else 0.0
        remainder_sd = model.sigma * theta**retained / math.sqrt(1.0 - theta * theta)
        x0 = partial + float(stream.normal(0.0, remainder_sd))
        future = noise.sample(model, n, stream)
        tail, _ = signal.lfilter([1.0], [1.0, -theta], future, zi=[theta * x0])
        states = np.concatenate(([x0], tail))
        xi = np.concatenate((past, future))

    states.setflags(write=False)
    xi.setflags(write=False)
    logger.debug(f'simulated path theta={theta} n={n} history={retained} init={init.value}')
    return SamplePath(
        theta=theta,
        n=n,
        states=states,
        noise=xi,
        first_index=1 - retained,
        init_policy=init,
        horizon=horizon,
    )


def simulate_many(
    theta: float,
    n: int,
    model: NoiseModel,
    master_seed: int,
    point_id: int,
    replicates: int,
    **kwargs,
) -> Iterator[SamplePath]:
    """Yield replicate paths, replicate r drawing from stream (master_seed, point_id, r)."""
    for replicate in range(replicates):
        yield simulate(theta, n, model, stream_rng(master_seed, point_id, replicate), **kwargs)


def truncated_state(path: SamplePath, k: int, m: int) -> float:
    """
    X_{k-1,m} = sum_{j=0}^{m-2} theta^j xi_{k-1-j}.

    Raises:
        HistoryRangeError: If xi_{k-m+1} is not retained
    """
    if m < 2:
        raise ValueError(f'm must be at least 2, got {m}')
    return stationary_solution(path.theta, path.xi_range(k - m + 1, k - 1))


def truncated_states(path: SamplePath, m: int, start: int, stop: int) -> np.ndarray:
    """Vectorized X_{k-1,m} for k = start..stop."""
    if m < 2:
        raise ValueError(f'm must be at least 2, got {m}')
    xs = path.xi_range(start - m + 1, stop - 1)
    taps = path.theta ** np.arange(m - 1, dtype=np.float64)
    return signal.convolve(xs, taps, mode='valid')


def truncation_residual(path: SamplePath, k: int, m: int) -> float:
    """X_{k-1} - X_{k-1,m}, equal to theta^{m-1} times the state m-1 steps earlier."""
    return path.x(k - 1) - truncated_state(path, k, m)


def pair_product(path: SamplePath, k: int, p: int) -> float:
    """W_{k,p} = xi_k xi_{k-p}."""
    if p < 0:
        raise ValueError(f'lag must be non-negative, got {p}')
    return path.xi(k) * path.xi(k - p)


def pair_products(path: SamplePath, p: int, start: int, stop: int) -> np.ndarray:
    """Vectorized W_{k,p} for k = start..stop."""
    if p < 0:
        raise ValueError(f'lag must be non-negative, got {p}')
    return path.xi_range(start, stop) * path.xi_range(start - p, stop - p)


def path_frame(path: SamplePath) -> pd.DataFrame:
    """Tabulate k, X_k, xi_k for k = 0..n (xi_0 is NaN when it was not retained)."""
    xi = np.full(path.n + 1, np.nan)
    first = max(0, path.first_index)
    xi[first:] = path.xi_range(first, path.n)
    return pd.DataFrame({'k': np.arange(path.n + 1), 'X_k': path.states, 'xi_k': xi})
