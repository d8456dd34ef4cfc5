import math

import numpy as np
import pytest

from unitrootmdp.ar1 import (
    pair_product,
    pair_products,
    path_frame,
    series_horizon,
    simulate,
    simulate_many,
    stationary_solution,
    stationary_variance,
    truncated_state,
    truncated_states,
    truncation_residual,
)
from unitrootmdp.exceptions import ConfigurationError, HistoryRangeError
from unitrootmdp.models import InitPolicy
from unitrootmdp.utils import stream_rng


def test_series_horizon():
    """Test the smallest H with theta^H <= eps."""
    assert series_horizon(0.5, 1e-12) == 40
    assert series_horizon(0.0) == 1
    assert 0.9 ** series_horizon(0.9) <= 1e-12
    assert 0.9 ** (series_horizon(0.9) - 1) > 1e-12

    with pytest.raises(ValueError):
        series_horizon(1.0)

    with pytest.raises(ValueError):
        series_horizon(0.5, 0.0)


def test_stationary_variance():
    assert stationary_variance(0.5, 1.0) == pytest.approx(4.0 / 3.0)
    assert stationary_variance(0.0, 2.0) == 2.0


def test_stationary_solution_is_polynomial():
    """Test sum_p theta^p xi_{k-p} with the newest value last."""
    assert stationary_solution(0.5, np.array([4.0, 2.0, 1.0])) == pytest.approx(3.0)


@pytest.mark.parametrize('theta', [0.0, 0.5, 0.95])
def test_simulate_satisfies_recursion(theta, normal_noise):
    """Test that X_k - theta X_{k-1} reproduces xi_k for k = 1..n."""
    path = simulate(theta, 200, normal_noise, stream_rng(11, 0, 0))
    assert path.states.shape == (201,)
    residual = path.states[1:] - theta * path.states[:-1]
    np.testing.assert_allclose(residual, path.xi_range(1, 200), atol=1e-10)


def test_simulate_truncated_start(normal_noise):
    """Test that X_0 is the moving-average series over the retained history."""
    path = simulate(0.7, 30, normal_noise, stream_rng(2, 0, 0), eps_init=1e-12)
    horizon = series_horizon(0.7, 1e-12)
    assert path.horizon == horizon
    assert path.first_index == 1 - horizon
    expected = stationary_solution(0.7, path.xi_range(path.first_index, 0))
    assert path.x(0) == pytest.approx(expected, abs=1e-10)


def test_simulate_history_extends_noise(normal_noise):
    path = simulate(0.2, 10, normal_noise, stream_rng(2, 0, 0), history=60)
    assert path.first_index == -59
    assert path.history == 60


def test_simulate_exact_gaussian(normal_noise, rademacher_noise):
    """Test the exact Gaussian start and its restriction to normal noise."""
    path = simulate(
        0.9, 20, normal_noise, stream_rng(4, 0, 0), init=InitPolicy.EXACT_GAUSSIAN, history=5
    )
    assert path.first_index == -4
    assert path.horizon is None
    residual = path.states[1:] - 0.9 * path.states[:-1]
    np.testing.assert_allclose(residual, path.xi_range(1, 20), atol=1e-10)

    with pytest.raises(ConfigurationError):
        simulate(0.9, 20, rademacher_noise, stream_rng(4), init=InitPolicy.EXACT_GAUSSIAN)


def test_exact_gaussian_start_variance(normal_noise):
    """Test that X_0 has the stationary variance 1 / (1 - theta^2)."""
    starts = np.array(
        [
            simulate(0.5, 1, normal_noise, stream_rng(9, 0, r), init=InitPolicy.EXACT_GAUSSIAN).x(0)
            for r in range(4000)
        ]
    )
    assert starts.var() == pytest.approx(4.0 / 3.0, rel=0.1)


@pytest.mark.parametrize('noise', ['normal_noise', 'rademacher_noise'])
def test_truncated_start_is_stationary(noise, request):
    """Test that Var X_k and E X_k X_{k+1} do not drift along the path."""
    model = request.getfixturevalue(noise)
    theta, n = 0.9, 60
    states = np.array([path.states for path in simulate_many(theta, n, model, 12, 0, 4000)])
    variance = stationary_variance(theta, 1.0)
    for k in (0, n // 2, n):
        assert np.mean(states[:, k] ** 2) == pytest.approx(variance, rel=0.1)
    for k in (0, n - 1):
        lagged = np.mean(states[:, k] * states[:, k + 1])
        assert lagged == pytest.approx(theta * variance, rel=0.15)


def test_simulate_reproducible(normal_noise):
    """Test that the same stream yields the same path."""
    first = simulate(0.8, 40, normal_noise, stream_rng(6, 1, 2))
    second = simulate(0.8, 40, normal_noise, stream_rng(6, 1, 2))
    np.testing.assert_array_equal(first.states, second.states)


def test_simulate_validation(normal_noise):
    with pytest.raises(ValueError):
        simulate(1.0, 10, normal_noise, stream_rng(1))

    with pytest.raises(ValueError):
        simulate(0.5, 0, normal_noise, stream_rng(1))

    with pytest.raises(ValueError):
        simulate(0.5, 10, normal_noise, stream_rng(1), history=-1)


def test_simulate_many_uses_replicate_streams(normal_noise):
    """Test that replicate r of simulate_many equals a path on stream (seed, point, r)."""
    paths = list(simulate_many(0.5, 15, normal_noise, 3, 2, 4))
    assert len(paths) == 4
    direct = simulate(0.5, 15, normal_noise, stream_rng(3, 2, 2))
    np.testing.assert_array_equal(paths[2].states, direct.states)


def test_paths_are_immutable(short_path):
    with pytest.raises(ValueError):
        short_path.states[0] = 1.0


def test_truncated_states_match_scalar(short_path):
    """Test the vectorized truncated states against the scalar helper."""
    m = 6
    vector = truncated_states(short_path, m, 1, 20)
    scalar = [truncated_state(short_path, k, m) for k in range(1, 21)]
    np.testing.assert_allclose(vector, scalar, atol=1e-12)


@pytest.mark.parametrize('m', [2, 5, 10])
def test_truncation_residual_identity(short_path, m):
    """Test X_{k-1} - X_{k-1,m} = theta^{m-1} X_{k-m}."""
    theta = short_path.theta
    for k in range(m, short_path.n + 1):
        expected = theta ** (m - 1) * short_path.x(k - m)
        assert truncation_residual(short_path, k, m) == pytest.approx(expected, abs=1e-10)


def test_truncated_state_needs_history(short_path):
    with pytest.raises(HistoryRangeError):
        truncated_state(short_path, short_path.first_index, 3)

    with pytest.raises(ValueError):
        truncated_state(short_path, 5, 1)


def test_pair_products(short_path):
    """Test W_{k,p} = xi_k xi_{k-p} in scalar and vector form."""
    vector = pair_products(short_path, 2, 3, 10)
    expected = [short_path.xi(k) * short_path.xi(k - 2) for k in range(3, 11)]
    np.testing.assert_allclose(vector, expected)
    assert pair_product(short_path, 4, 0) == pytest.approx(short_path.xi(4) ** 2)

    with pytest.raises(ValueError):
        pair_products(short_path, -1, 3, 10)


def test_path_frame(short_path):
    """Test the k, X_k, xi_k table."""
    frame = path_frame(short_path)
    assert list(frame.columns) == ['k', 'X_k', 'xi_k']
    assert len(frame) == short_path.n + 1
    assert frame['xi_k'].iloc[5] == short_path.xi(5)
    assert not math.isnan(frame['xi_k'].iloc[0])
