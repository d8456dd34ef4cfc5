"""
Big-block / small-block decomposition, truncation, the blocking conditions
(A)-(D) and the maximal inequality for sums of W_{k,p} = xi_k xi_{k-p}.
"""

import logging
import math
from collections.abc import Sequence

import numpy as np
import pandas as pd

from . import noise
from .estimators import u_series
from .exceptions import InfeasibleBlockingError, SequenceTooShortError
from .models import (
    DEFAULT_ALPHA0,
    DEFAULT_BETA0,
    DEFAULT_CONDITION_B_M,
    DEFAULT_GAMMA_DEP,
    WILSON_Z,
    BlockDecomposition,
    ConditionReport,
    ConditionResult,
    NoiseModel,
    SamplePath,
    SchedulePoint,
    TruncationSpec,
    UWindow,
)
from .umoments import (
    block_variance_exact,
    hat_x_values,
    u_from_rows,
    u_values,
    weighted_time_sum,
)
from .utils import k_m, stream_rng, wilson_interval

logger = logging.getLogger(__name__)

# Prefactor of the maximal inequality P(max |sum W| >= t) <= 36 exp(-t^2 / (alpha0 n + beta0 t))
MAXIMAL_BOUND_PREFACTOR = 36.0
# Replicates per vectorized batch in Monte Carlo helpers
MC_BATCH = 4096
# Last stream-key component of the condition (B) and (C) draws; block-sum draws use 0
CONDITION_B_STREAM = 1
CONDITION_C_STREAM = 2


def decompose(seq: Sequence[float], m: int, p: int) -> BlockDecomposition:
    """
    Split sum X_i into super-block sums Z_h and three leftover pieces.

    Y_j sums the j-th width-m block; Z_h sums Y_j over (h-1)p < j < hp, leaving
    every p-th block out. With l = floor(n/m) and t = max{h : hp < l}:
    sum X = sum Z_h + sum_{j=tp+1}^{l} Y_j + sum_{h=1}^{t} Y_{hp} + sum_{i=lm+1}^{n} X_i.

    Raises:
        SequenceTooShortError: If n < m p
    """
    if m < 1:
        raise ValueError(f'block width must be positive, got {m}')
    if p < 2:
        raise ValueError(f'super-block factor must be at least 2, got {p}')
    values = np.asarray(seq, dtype=np.float64)
    n = values.size
    if n < m * p:
        raise SequenceTooShortError(f'sequence of length {n} shorter than m*p = {m * p}')

    l_count = n // m
    t_count = (l_count - 1) // p
    y_blocks = values[: l_count * m].reshape(l_count, m).sum(axis=1)
    z_blocks = y_blocks[: t_count * p].reshape(t_count, p)[:, : p - 1].sum(axis=1)
    leftovers = (
        float(y_blocks[t_count * p :].sum()),
        float(y_blocks[p - 1 : t_count * p : p].sum()),
        float(values[l_count * m :].sum()),
    )
    return BlockDecomposition(
        m=m,
        p=p,
        n=n,
        l_count=l_count,
        t_count=t_count,
        y_blocks=y_blocks,
        z_blocks=z_blocks,
        leftovers=leftovers,
        total=float(values.sum()),
    )


def choose_p(n: int, m: int, b: float, gamma_dep: float = DEFAULT_GAMMA_DEP) -> int:
    """
    Super-block factor p = max(2, floor(((sqrt(n)/b)^(1/(1+gamma)) / m)^(1/2))).

    This keeps b (mp)^(1+gamma) / sqrt(n) below the square root of
    b m^(1+gamma) / sqrt(n) whenever the formula exceeds 2.

    Raises:
        InfeasibleBlockingError: If b m^(1+gamma) / sqrt(n) >= 1
    """
    ratio = b * m ** (1.0 + gamma_dep) / math.sqrt(n)
    if ratio >= 1.0:
        raise InfeasibleBlockingError(
            f'b m^(1+gamma)/sqrt(n) = {ratio:.4g} >= 1: condition (A) fails at n={n}, m={m}'
        )
    return max(2, math.floor(ratio ** (-1.0 / (2.0 * (1.0 + gamma_dep)))))


def truncate(seq: Sequence[float], spec: TruncationSpec) -> tuple[np.ndarray, int]:
    """Zero every entry with |x| > tau sqrt(n) / b; return the sequence and the count zeroed."""
    values = np.asarray(seq, dtype=np.float64)
    mask = np.abs(values) > spec.threshold
    return np.where(mask, 0.0, values), int(mask.sum())


def decompose_truncated(
    seq: Sequence[float], m: int, p: int, spec: TruncationSpec
) -> BlockDecomposition:
    truncated, count = truncate(seq, spec)
    return decompose(truncated, m, p).model_copy(update={'truncated_count': count})


def _u_bound(window: UWindow, model: NoiseModel) -> float:
    """Almost-sure bound on |U_{1,l,m}| for bounded noise."""
    s = model.max_abs
    drift = window.theta**window.l * window.second_moment
    return s * s * (2.0 * k_m(window.theta, window.m) + 1.0) + drift


def _sample_scaled_u(
    window: UWindow,
    model: NoiseModel,
    replicates: int,
    master_seed: int,
    point_id: int,
    condition: int,
) -> np.ndarray:
    """Draws of sqrt(1-theta^2) U_{1,l,m}; batch b uses stream (seed, point_id, b, condition)."""
    m, l = window.m, window.l  # noqa: E741
    width = m + l
    draws = []
    for batch, start in enumerate(range(0, replicates, MC_BATCH)):
        rows = min(MC_BATCH, replicates - start)
        stream = stream_rng(master_seed, point_id, batch, condition)
        values = noise.sample(model, rows * width, stream).reshape(rows, width)
        draws.append(u_from_rows(values, 2 - m, 1, l, m, window.theta, window.second_moment))
    return math.sqrt(1.0 - window.theta**2) * np.concatenate(draws)


def _status(ci_high: float, threshold: float) -> str:
    return 'ok' if ci_high <= threshold else 'inconclusive'


def check_abcd(
    point: SchedulePoint,
    window: UWindow,
    model: NoiseModel,
    tolerance: float = 0.1,
    replicates: int = 20_000,
    master_seed: int = 0,
    point_id: int = 0,
    gamma_dep: float = DEFAULT_GAMMA_DEP,
    condition_b_m: float = DEFAULT_CONDITION_B_M,
    epsilon: float = 1.0,
) -> ConditionReport:
    """
    Evaluate blocking conditions (A)-(D) for X_1 = sqrt(1-theta^2) U_{1,l,m} at one point.

    (A) b m^(1+gamma)/sqrt(n) -> 0.
    (B) (n/(b^2 m)) int_M^inf e^x P(|X_1| >= sqrt(n) x/(b m)) dx -> 0, computed as
        (n/(b^2 m)) E(exp(|X_1| b m/sqrt(n)) - e^M)_+.
    (C) (sqrt(n)/b)^(2+2/(1+gamma)) P(|X_1| > eps (sqrt(n)/b)^(1-1/(1+gamma))) -> 0.
    (D1) (1-theta^2)/m Var(U_1 + ... + U_m) -> 4 (E xi^2)^2.
    (D2) (1-theta^2)/m sum_k k E(U_1 U_{k+1}) -> 0.

    Monte Carlo conditions whose upper confidence bound stays above the tolerance
    are reported 'inconclusive'; bounded noise is settled analytically when its
    almost-sure bound already makes the expression vanish.
    """
    if window.m != point.m or window.theta != point.theta:
        raise ValueError('window does not match the schedule point')
    n, b, m, theta = point.n, point.b, point.m, point.theta
    sqrt_n = math.sqrt(n)
    limit = 4.0 * window.second_moment**2
    results = []

    a_value = b * m ** (1.0 + gamma_dep) / sqrt_n
    results.append(
        ConditionResult(
            name='A',
            value=a_value,
            target=0.0,
            threshold=tolerance,
            status='ok' if a_value <= tolerance else 'exceeds',
            method='exact',
        )
    )

    scale = b * m / sqrt_n
    b_prefactor = n / (b * b * m)
    c_prefactor = (sqrt_n / b) ** (2.0 + 2.0 / (1.0 + gamma_dep))
    c_level = epsilon * (sqrt_n / b) ** (1.0 - 1.0 / (1.0 + gamma_dep))
    x_bound = math.inf
    if model.is_bounded:
        x_bound = math.sqrt(1.0 - theta * theta) * _u_bound(window, model)

    if x_bound * scale <= condition_b_m:
        results.append(
            ConditionResult(name='B', value=0.0, target=0.0, threshold=tolerance,
                            status='ok', method='analytic')
        )
    else:
        draws = _sample_scaled_u(
            window, model, replicates, master_seed, point_id, CONDITION_B_STREAM
        )
        with np.errstate(over='ignore'):
            excess = np.maximum(np.exp(np.abs(draws) * scale) - math.exp(condition_b_m), 0.0)
        mean = float(excess.mean())
        half = WILSON_Z * float(excess.std(ddof=1)) / math.sqrt(replicates)
        if not math.isfinite(mean):
            half = math.inf
        high = b_prefactor * (mean + half)
        results.append(
            ConditionResult(
                name='B',
                value=b_prefactor * mean,
                target=0.0,
                threshold=tolerance,
                status=_status(high, tolerance),
                method='monte-carlo',
                ci_low=max(0.0, b_prefactor * (mean - half)) if math.isfinite(half) else 0.0,
                ci_high=high,
            )
        )

    if x_bound <= c_level:
        results.append(
            ConditionResult(name='C', value=0.0, target=0.0, threshold=tolerance,
                            status='ok', method='analytic')
        )
    else:
        draws = _sample_scaled_u(
            window, model, replicates, master_seed, point_id, CONDITION_C_STREAM
        )
        hits = int((np.abs(draws) > c_level).sum())
        low, high = wilson_interval(hits, replicates)
        results.append(
            ConditionResult(
                name='C',
                value=c_prefactor * hits / replicates,
                target=0.0,
                threshold=tolerance,
                status=_status(c_prefactor * high, tolerance),
                method='monte-carlo',
                ci_low=c_prefactor * low,
                ci_high=c_prefactor * high,
            )
        )

    d1 = (1.0 - theta * theta) / m * block_variance_exact(window.l, window)
    results.append(
        ConditionResult(
            name='D1',
            value=d1,
            target=limit,
            threshold=tolerance,
            status='ok' if abs(d1 / limit - 1.0) <= tolerance else 'exceeds',
            method='exact',
        )
    )
    d2 = (1.0 - theta * theta) / m * weighted_time_sum(window.l, window)
    results.append(
        ConditionResult(
            name='D2',
            value=d2,
            target=0.0,
            threshold=tolerance,
            status='ok' if abs(d2) <= tolerance * limit else 'exceeds',
            method='exact',
        )
    )

    try:
        p = choose_p(n, m, b, gamma_dep)
    except InfeasibleBlockingError as exc:
        logger.warning(str(exc))
        p = None
    report = ConditionReport(point=point, l=window.l, p=p, results=results)
    if report.inconclusive:
        logger.warning(f'blocking conditions inconclusive at n={n} within {replicates} replicates')
    return report


def maximal_bound(
    t: float, n: int, alpha0: float = DEFAULT_ALPHA0, beta0: float = DEFAULT_BETA0
) -> float:
    """36 exp(-t^2 / (alpha0 n + beta0 t))."""
    if alpha0 <= 0 or beta0 <= 0:
        raise ValueError(f'alpha0 and beta0 must be positive, got {alpha0}, {beta0}')
    if t < 0:
        raise ValueError(f't must be non-negative, got {t}')
    return MAXIMAL_BOUND_PREFACTOR * math.exp(-t * t / (alpha0 * n + beta0 * t))


def falsify_maximal_bound(
    model: NoiseModel,
    n: int,
    p: int,
    t_values: Sequence[float],
    alpha0: float = DEFAULT_ALPHA0,
    beta0: float = DEFAULT_BETA0,
    replicates: int = 10_000,
    master_seed: int = 0,
) -> pd.DataFrame:
    """
    Compare P(max_j |sum_{k<=j} W_{k,p}| >= t) with the maximal bound by Monte Carlo.

    A row is invalid when the empirical frequency exceeds the bound; invalid rows
    mean the configured (alpha0, beta0) are too small for this noise law.
    """
    if p < 1:
        raise ValueError(f'lag p must be positive, got {p}')
    maxima = []
    for batch, start in enumerate(range(0, replicates, MC_BATCH // 4)):
        rows = min(MC_BATCH // 4, replicates - start)
        values = noise.sample(model, rows * (n + p), stream_rng(master_seed, batch))
        values = values.reshape(rows, n + p)
        w = values[:, p:] * values[:, :n]
        maxima.append(np.abs(np.cumsum(w, axis=1)).max(axis=1))
    maxima = np.concatenate(maxima)

    rows = []
    for t in t_values:
        frequency = float((maxima >= t).mean())
        bound = maximal_bound(t, n, alpha0, beta0)
        rows.append({'t': t, 'frequency': frequency, 'bound': bound, 'valid': frequency <= bound})
    frame = pd.DataFrame(rows)
    if not frame['valid'].all():
        logger.warning(f'maximal bound constants alpha0={alpha0}, beta0={beta0} falsified')
    return frame


def exponential_approx_gap(path: SamplePath, window: UWindow, b: float) -> float:
    """
    sqrt(1-theta^2) / (b sqrt(n-l)) |sum_{k=1}^{n-l} (U_{k,l,m} - U_{k,l})|.

    Raises:
        HistoryRangeError: If the path keeps fewer than m - 1 noise values before index 1
    """
    l = window.l  # noqa: E741
    approx = u_values(path, window)
    exact = u_series(path, l, window.second_moment)
    scale = math.sqrt(1.0 - path.theta**2) / (b * math.sqrt(path.n - l))
    return scale * abs(float(np.sum(approx - exact)))


def estimator_approx_gap(path: SamplePath, m: int, b: float, second_moment: float) -> float:
    """|sum_{k=1}^{n} (X-hat_{k,m} - X-hat_k)| / (b sqrt(n)) with X-hat_k using the full state."""
    approx = hat_x_values(path, m, second_moment)
    scale = math.sqrt(1.0 - path.theta**2) / second_moment
    full = scale * path.states[:-1] * path.xi_range(1, path.n)
    return abs(float(np.sum(approx - full))) / (b * math.sqrt(path.n))
