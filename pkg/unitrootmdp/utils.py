"""
Numeric helpers shared across the package.
"""

import math

import numpy as np

from .models import WILSON_Z


def geometric_sum(ratio: float, start: int, stop: int) -> float:
    """
    Sum ratio^j for j = start..stop, with an empty sum (stop < start) equal to 0.

    The closed form is written through expm1/log so that ratios close to 1
    (theta^2 near 1 along a schedule) keep full relative precision.

    Args:
        ratio: Common ratio in [0, 1]
        start: First exponent (>= 0)
        stop: Last exponent

    Returns:
        The geometric sum
    """
    if stop < start:
        return 0.0
    count = stop - start + 1
    if ratio == 0.0:
        return 1.0 if start == 0 else 0.0
    if ratio == 1.0:
        return float(count)
    log_ratio = math.log(ratio)
    return ratio**start * -math.expm1(count * log_ratio) / -math.expm1(log_ratio)


def k_m(theta: float, m: int) -> float:
    """K_m(theta) = sum_{j=1}^{m-1} theta^j."""
    return geometric_sum(theta, 1, m - 1)


def k_n(theta: float) -> float:
    """K_n = (1 - theta)^(-2)."""
    if not 0 <= theta < 1:
        raise ValueError(f'theta must lie in [0, 1), got {theta}')
    return (1.0 - theta) ** -2


def wilson_interval(hits: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    """
    Wilson score interval for a binomial proportion.

    Args:
        hits: Number of successes
        trials: Number of trials (> 0)
        z: Normal quantile of the two-sided level

    Returns:
        (low, high), clipped to [0, 1] and always containing hits / trials
    """
    if trials <= 0:
        raise ValueError(f'trials must be positive, got {trials}')
    if not 0 <= hits <= trials:
        raise ValueError(f'hits must lie in 0..{trials}, got {hits}')
    p_hat = hits / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p_hat + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p_hat * (1 - p_hat) / trials + z2 / (4 * trials * trials)) / denom
    low = min(max(0.0, center - half), p_hat)
    high = max(min(1.0, center + half), p_hat)
    return low, high


def stream_rng(master_seed: int, *stream_index: int) -> np.random.Generator:
    """
    Independent random stream for (master_seed, stream_index...).

    Streams are keyed through SeedSequence spawn keys feeding a counter-based
    Philox generator, so replicate r of point e draws the same numbers no
    matter which worker simulates it.
    """
    if master_seed < 0 or any(i < 0 for i in stream_index):
        raise ValueError('seeds and stream indices must be non-negative')
    seed_seq = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(stream_index))
    return np.random.Generator(np.random.Philox(seed_seq))


def strictly_increasing(values: list[float]) -> bool:
    return all(b > a for a, b in zip(values, values[1:]))


def non_increasing(values: list[float], slack: float = 0.0) -> bool:
    return all(b <= a + slack for a, b in zip(values, values[1:]))
