"""
Covariance, least-squares and Yule-Walker estimators, and the autoregressive
representation Z_k = theta^2 Z_{k-1} + U_k of the centered covariance process.
"""

import logging
import math
from typing import Any, Union

import numpy as np

from .exceptions import DegenerateSampleError
from .models import CovarianceReport, SamplePath

logger = logging.getLogger(__name__)

PathLike = Union[SamplePath, np.ndarray]


def _states(path: PathLike) -> np.ndarray:
    if isinstance(path, SamplePath):
        return path.states
    return np.asarray(path, dtype=np.float64)


def u_combine(
    theta: float,
    lagged_state: np.ndarray,
    xi_k: np.ndarray,
    xi_kl: np.ndarray,
    state: np.ndarray,
    l: int,  # noqa: E741
    second_moment: float,
) -> np.ndarray:
    """theta * S_{k+l-1} xi_k + theta * xi_{k+l} S_{k-1} + xi_{k+l} xi_k - theta^l E xi^2."""
    return (
        theta * lagged_state * xi_k
        + theta * xi_kl * state
        + xi_kl * xi_k
        - theta**l * second_moment
    )


def empirical_covariance(path: PathLike, l: int) -> float:  # noqa: E741
    """
    C*_l = (1 / (n - l)) sum_{k=1}^{n-l} X_{k+l} X_k.

    Args:
        path: Simulated path, or an array X_0..X_n
        l: Lag in [0, n)

    Returns:
        The empirical lag-l covariance
    """
    states = _states(path)
    n = states.size - 1
    if not 0 <= l < n:
        raise ValueError(f'lag must lie in [0, {n}), got {l}')
    return float(np.dot(states[1 + l :], states[1 : n - l + 1]) / (n - l))


def theoretical_covariance(theta: float, l: int, second_moment: float) -> float:  # noqa: E741
    """C_l = theta^l E xi^2 / (1 - theta^2)."""
    if not 0 <= theta < 1:
        raise ValueError(f'theta must lie in [0, 1), got {theta}')
    return theta**l * second_moment / (1.0 - theta * theta)


def ls_estimate(path: PathLike) -> float:
    """Least-squares estimate sum X_k X_{k-1} / sum_{k=1}^n X_{k-1}^2."""
    states = _states(path)
    denominator = float(np.dot(states[:-1], states[:-1]))
    if denominator == 0.0:
        raise DegenerateSampleError('least-squares denominator is zero')
    return float(np.dot(states[1:], states[:-1])) / denominator


def yw_estimate(path: PathLike) -> float:
    """Yule-Walker estimate sum X_k X_{k-1} / sum_{k=0}^n X_k^2."""
    states = _states(path)
    denominator = float(np.dot(states, states))
    if denominator == 0.0:
        raise DegenerateSampleError('Yule-Walker denominator is zero')
    return float(np.dot(states[1:], states[:-1])) / denominator


def u_series(path: SamplePath, l: int, second_moment: float) -> np.ndarray:  # noqa: E741
    """Exact U_{k,l} for k = 1..n-l."""
    n = path.n
    if not 0 <= l < n:
        raise ValueError(f'lag must lie in [0, {n}), got {l}')
    states = path.states
    return u_combine(
        path.theta,
        states[l:n],
        path.xi_range(1, n - l),
        path.xi_range(1 + l, n),
        states[: n - l],
        l,
        second_moment,
    )


def covariance_report(
    path: SamplePath, l: int, second_moment: float  # noqa: E741
) -> CovarianceReport:
    """Build C*, C and the Z/U processes for one lag."""
    n = path.n
    theoretical = theoretical_covariance(path.theta, l, second_moment)
    states = path.states
    z_series = states[l:] * states[: n - l + 1] - theoretical
    return CovarianceReport(
        l=l,
        empirical=empirical_covariance(path, l),
        theoretical=theoretical,
        z_series=z_series,
        u_series=u_series(path, l, second_moment),
    )


def representation_decompose(report: CovarianceReport, theta: float, n: int) -> tuple[float, float]:
    """
    Split C* - C into the mean of U and the boundary term.

    Returns:
        (mean(U) / (1 - theta^2), theta^2 (Z_0 - Z_{n-l}) / ((n - l)(1 - theta^2)))
    """
    length = n - report.l
    if report.u_series.size != length or report.z_series.size != length + 1:
        raise ValueError('report series do not match n')
    scale = 1.0 - theta * theta
    mean_u = float(report.u_series.mean()) / scale
    boundary = theta * theta * (report.z_series[0] - report.z_series[-1]) / (length * scale)
    return mean_u, float(boundary)


def boundary_tail_bound(
    theta: float,
    n: int,
    l: int,  # noqa: E741
    b: float,
    r: float,
    alpha: float,
    integrability_value: float,
) -> float:
    """
    Exponential Markov bound on P(sqrt(1-theta^2) |Z_0 - Z_{n-l}| / (b sqrt(n-l)) >= r).

    The bound is 4 exp(-lambda r b sqrt(n-l) / (2 sqrt(1-theta^2))) E exp(alpha xi^2)
    with lambda = (1 - theta)^2 alpha.
    """
    if r <= 0 or alpha <= 0:
        raise ValueError('r and alpha must be positive')
    lam = (1.0 - theta) ** 2 * alpha
    exponent = lam * r * b * math.sqrt(n - l) / (2.0 * math.sqrt(1.0 - theta * theta))
    return 4.0 * math.exp(-exponent) * integrability_value


def estimate_summary(
    path: SamplePath, l: int, second_moment: float  # noqa: E741
) -> dict[str, Any]:
    """Row of the ``estimate`` command: covariances, both estimators and the boundary ratio."""
    report = covariance_report(path, l, second_moment)
    mean_u, boundary = representation_decompose(report, path.theta, path.n)
    ratio = abs(boundary) / abs(mean_u) if mean_u != 0 else math.inf
    return {
        'l': l,
        'empirical': report.empirical,
        'theoretical': report.theoretical,
        'ls': ls_estimate(path),
        'yw': yw_estimate(path),
        'boundary_ratio': ratio,
    }
