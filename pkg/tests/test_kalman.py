import numpy as np
import pytest

from dlfilter.core import StateEstimate, make_grid
from dlfilter.kalman import (FilterError, analysis, forecast, forecast_step,
                             joseph_covariance, kalman_gain)
from dlfilter.model import ModelConfig
from dlfilter.obsnet import Observation


def random_spd(rng, n, scale=1.0):
    a = rng.standard_normal((n, n))
    return scale * (a @ a.T) + 0.1 * np.eye(n)


def condition_oracle(mean, cov, stations, values, obs_var):
    """Posterior via the joint Gaussian of (state, readings) and a Schur complement."""
    stations = np.asarray(stations)
    cross = cov[:, stations]
    s = cov[np.ix_(stations, stations)] + obs_var * np.eye(stations.size)
    w = cross @ np.linalg.inv(s)
    post_mean = mean + w @ (values - mean[stations])
    post_cov = cov - w @ cross.T
    return post_mean, 0.5 * (post_cov + post_cov.T)


def selector(stations, n):
    h = np.zeros((len(stations), n))
    h[np.arange(len(stations)), stations] = 1.0
    return h


def obs_block(values, stations, time_index, variance):
    return [Observation(value=float(v), station=int(s), time_index=time_index,
                        variance=variance)
            for v, s in zip(values, stations)]


# --- forecast ------------------------------------------------------------------

def test_forecast_identity_transition_no_noise_is_fixed_point():
    rng = np.random.default_rng(0)
    mean = rng.standard_normal(6)
    cov = random_spd(rng, 6)
    new_mean, new_cov = forecast_step(mean, cov, np.eye(6), 0.0)
    np.testing.assert_array_equal(new_mean, mean)
    np.testing.assert_allclose(new_cov, cov, rtol=0, atol=1e-16)


def test_forecast_identity_transition_inflates_diagonal_by_noise_var():
    rng = np.random.default_rng(1)
    cov = random_spd(rng, 8)
    _, new_cov = forecast_step(np.zeros(8), cov, np.eye(8), 0.08)
    np.testing.assert_allclose(np.diag(new_cov), np.diag(cov) + 0.08, rtol=0, atol=1e-15)
    np.testing.assert_allclose(new_cov - np.diag(np.diag(new_cov)),
                               cov - np.diag(np.diag(cov)), rtol=0, atol=1e-16)


def test_forecast_shift_transition_permutes_covariance():
    rng = np.random.default_rng(2)
    n = 10
    cov = random_spd(rng, n)
    shift = np.roll(np.eye(n), -1, axis=1)
    _, new_cov = forecast_step(np.zeros(n), cov, shift, 0.0)
    # permutation similarity: rows/columns cycle together, trace is preserved
    oracle = cov[np.ix_((np.arange(n) - 1) % n, (np.arange(n) - 1) % n)]
    np.testing.assert_allclose(new_cov, oracle, rtol=0, atol=1e-15)
    assert np.trace(new_cov) == pytest.approx(np.trace(cov))


def test_forecast_through_grid_model():
    grid = make_grid(2.0, 50, 0.99, 1.0, 10)
    prev = StateEstimate(3, np.zeros(50), 0.02 * np.eye(50))
    est = forecast(prev, grid, ModelConfig(noise_var=0.08), np.zeros(50))
    assert est.time_index == 4
    assert est.trace > prev.trace


# --- gain ----------------------------------------------------------------------

def test_scalar_gain_half():
    gain = kalman_gain(np.array([[1.0]]), np.array([[1.0]]), 1.0).gain
    assert gain[0, 0] == pytest.approx(0.5)


def test_scalar_gain_point_eight():
    gain = kalman_gain(np.array([[0.08]]), np.array([[1.0]]), 0.02).gain
    assert gain[0, 0] == pytest.approx(0.8)


def test_gain_vanishes_for_uninformative_data():
    rng = np.random.default_rng(3)
    cov = random_spd(rng, 12)
    h = selector([2, 7, 9], 12)
    gain = kalman_gain(cov, h, 1e9).gain
    assert np.abs(gain).max() < 1e-6


def test_gain_failure_names_time_index():
    cov = np.zeros((3, 3))
    h = selector([0, 1], 3)
    with pytest.raises(FilterError, match="time index 17"):
        kalman_gain(cov, h, 0.0, time_index=17)


# --- analysis ------------------------------------------------------------------

def test_analysis_empty_block_returns_forecast():
    est = StateEstimate(5, np.ones(4), np.eye(4))
    assert analysis(est, [], np.eye(4), 0.02) is est


def test_analysis_scalar_case():
    est = StateEstimate(1, np.array([0.0]), np.array([[0.08]]))
    out = analysis(est, obs_block([1.0], [0], 1, 0.02), np.array([[1.0]]), 0.02)
    assert out.mean[0] == pytest.approx(0.8)
    assert out.covariance[0, 0] == pytest.approx(0.016)


def test_analysis_matches_gaussian_conditioning_oracle():
    rng = np.random.default_rng(4)
    for _ in range(25):
        n = 4
        cov = random_spd(rng, n)
        mean = rng.standard_normal(n)
        stations = np.sort(rng.choice(n, size=2, replace=False))
        values = rng.standard_normal(2)
        obs_var = float(rng.uniform(0.05, 0.5))
        est = analysis(StateEstimate(1, mean, cov),
                       obs_block(values, stations, 1, obs_var),
                       selector(stations, n), obs_var)
        ref_mean, ref_cov = condition_oracle(mean, cov, stations, values, obs_var)
        np.testing.assert_allclose(est.mean, ref_mean, rtol=0, atol=1e-10)
        np.testing.assert_allclose(est.covariance, ref_cov, rtol=0, atol=1e-10)


def test_analysis_never_raises_trace():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = 8
        cov = random_spd(rng, n)
        stations = np.sort(rng.choice(n, size=3, replace=False))
        est = analysis(StateEstimate(1, rng.standard_normal(n), cov),
                       obs_block(rng.standard_normal(3), stations, 1, 0.1),
                       selector(stations, n), 0.1)
        assert np.trace(est.covariance) <= np.trace(cov) + 1e-12


def test_gain_minimizes_joseph_trace():
    rng = np.random.default_rng(6)
    cov = random_spd(rng, 10)
    h = selector([0, 4, 7], 10)
    obs_var = 0.07
    gain = kalman_gain(cov, h, obs_var).gain
    base = np.trace(joseph_covariance(cov, gain, h, obs_var))
    for _ in range(100):
        delta = rng.standard_normal(gain.shape)
        delta /= np.linalg.norm(delta)
        perturbed = np.trace(joseph_covariance(cov, gain + 1e-3 * delta, h, obs_var))
        assert perturbed >= base - 1e-12


def test_joseph_form_agrees_with_standard_update_at_the_optimum():
    rng = np.random.default_rng(7)
    cov = random_spd(rng, 9)
    h = selector([1, 5], 9)
    obs_var = 0.3
    gain = kalman_gain(cov, h, obs_var).gain
    standard = (np.eye(9) - gain @ h) @ cov
    np.testing.assert_allclose(joseph_covariance(cov, gain, h, obs_var),
                               0.5 * (standard + standard.T), rtol=0, atol=1e-12)


def test_analysis_rejects_mismatched_times():
    est = StateEstimate(3, np.zeros(4), np.eye(4))
    block = obs_block([1.0], [0], 2, 0.1)
    with pytest.raises(ValueError):
        analysis(est, block, selector([0], 4), 0.1)


def test_analysis_rejects_dimension_mismatch():
    est = StateEstimate(1, np.zeros(4), np.eye(4))
    block = obs_block([1.0, 2.0], [0, 1], 1, 0.1)
    with pytest.raises(ValueError):
        analysis(est, block, selector([0], 4), 0.1)


def test_analysis_covariance_stays_symmetric():
    rng = np.random.default_rng(8)
    cov = random_spd(rng, 12)
    stations = [0, 3, 11]
    est = analysis(StateEstimate(1, rng.standard_normal(12), cov),
                   obs_block(rng.standard_normal(3), stations, 1, 0.02),
                   selector(stations, 12), 0.02)
    np.testing.assert_array_equal(est.covariance, est.covariance.T)
