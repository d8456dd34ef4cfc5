import numpy as np
import pytest

from unitrootmdp.ar1 import simulate
from unitrootmdp.estimators import (
    boundary_tail_bound,
    covariance_report,
    empirical_covariance,
    estimate_summary,
    ls_estimate,
    representation_decompose,
    theoretical_covariance,
    u_series,
    yw_estimate,
)
from unitrootmdp.exceptions import DegenerateSampleError
from unitrootmdp.utils import stream_rng


def test_empirical_covariance_on_known_states():
    """Test C*_l on X = (1, 2, 3, 4)."""
    states = np.array([1.0, 2.0, 3.0, 4.0])
    assert empirical_covariance(states, 0) == pytest.approx(29.0 / 3.0)
    assert empirical_covariance(states, 1) == pytest.approx(9.0)

    with pytest.raises(ValueError):
        empirical_covariance(states, 3)


def test_theoretical_covariance():
    assert theoretical_covariance(0.5, 2, 1.0) == pytest.approx(1.0 / 3.0)
    assert theoretical_covariance(0.0, 0, 2.0) == 2.0

    with pytest.raises(ValueError):
        theoretical_covariance(1.0, 0, 1.0)


def test_estimators_on_known_states():
    """Test the least-squares and Yule-Walker estimates on X = (1, 2, 3, 4)."""
    states = np.array([1.0, 2.0, 3.0, 4.0])
    assert ls_estimate(states) == pytest.approx(20.0 / 14.0)
    assert yw_estimate(states) == pytest.approx(20.0 / 30.0)


def test_estimators_degenerate_sample():
    """Test that an all-zero sample raises DegenerateSampleError."""
    with pytest.raises(DegenerateSampleError):
        ls_estimate(np.zeros(5))

    with pytest.raises(DegenerateSampleError):
        yw_estimate(np.zeros(5))


def test_estimators_accept_paths(short_path):
    assert ls_estimate(short_path) == ls_estimate(short_path.states)
    assert abs(yw_estimate(short_path)) <= 1.0


@pytest.mark.parametrize('theta', [0.0, 0.5, 0.95])
@pytest.mark.parametrize('lag', [0, 1, 3])
def test_representation_identity(theta, lag, normal_noise):
    """Test C* - C = mean(U) / (1 - theta^2) + boundary term on simulated paths."""
    for replicate in range(3):
        path = simulate(theta, 80, normal_noise, stream_rng(21, 0, replicate))
        report = covariance_report(path, lag, 1.0)
        mean_u, boundary = representation_decompose(report, theta, path.n)
        difference = report.empirical - report.theoretical
        assert difference == pytest.approx(mean_u + boundary, rel=1e-9, abs=1e-10)


@pytest.mark.parametrize('lag', [0, 2])
def test_z_recursion(short_path, lag):
    """Test Z_k = theta^2 Z_{k-1} + U_k for k = 1..n-l."""
    report = covariance_report(short_path, lag, 1.0)
    theta2 = short_path.theta**2
    z = report.z_series
    np.testing.assert_allclose(z[1:] - theta2 * z[:-1], report.u_series, atol=1e-10)


def test_report_lengths(short_path):
    report = covariance_report(short_path, 2, 1.0)
    assert report.z_series.size == short_path.n - 1
    assert report.u_series.size == short_path.n - 2

    with pytest.raises(ValueError):
        u_series(short_path, short_path.n, 1.0)


def test_representation_rejects_mismatched_n(short_path):
    report = covariance_report(short_path, 1, 1.0)
    with pytest.raises(ValueError):
        representation_decompose(report, short_path.theta, short_path.n + 1)


def test_boundary_tail_bound_monotone():
    """Test that the Markov bound decreases in b and in r."""
    base = boundary_tail_bound(0.9, 10_000, 1, 2.0, 1.0, 0.25, 1.5)
    assert boundary_tail_bound(0.9, 10_000, 1, 4.0, 1.0, 0.25, 1.5) < base
    assert boundary_tail_bound(0.9, 10_000, 1, 2.0, 2.0, 0.25, 1.5) < base

    with pytest.raises(ValueError):
        boundary_tail_bound(0.9, 100, 1, 2.0, 0.0, 0.25, 1.5)


def test_estimate_summary(short_path):
    """Test the keys of the estimate row."""
    row = estimate_summary(short_path, 1, 1.0)
    assert set(row) == {'l', 'empirical', 'theoretical', 'ls', 'yw', 'boundary_ratio'}
    assert row['l'] == 1
    assert row['boundary_ratio'] >= 0
