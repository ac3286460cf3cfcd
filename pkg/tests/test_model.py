import numpy as np
import pytest

from dlfilter.core import NoiseSource, make_grid
from dlfilter.model import ModelConfig, lax_friedrichs_matrix, model_step


def unit_grid(n_points=50, n_steps=10):
    # cfl = 1 with unit speed makes dt/dx exactly 1
    return make_grid(2.0, n_points, 1.0, 1.0, n_steps)


def test_unit_lambda_is_circular_shift_matrix():
    grid = unit_grid()
    matrix = lax_friedrichs_matrix(grid, np.ones(grid.n_points))
    expected = np.roll(np.eye(grid.n_points), -1, axis=1)  # row l: single 1 at column l-1
    assert np.array_equal(matrix, expected)


def test_zero_lambda_is_neighbor_average():
    grid = unit_grid()
    matrix = lax_friedrichs_matrix(grid, np.zeros(grid.n_points))
    constant = np.full(grid.n_points, 3.7)
    np.testing.assert_allclose(matrix @ constant, constant, rtol=0, atol=1e-14)
    assert matrix[0, 1] == 0.5 and matrix[0, grid.n_points - 1] == 0.5


def test_half_lambda_stencil_hand_expansion():
    grid = make_grid(2.0, 4, 1.0, 1.0, 1)
    matrix = lax_friedrichs_matrix(grid, np.full(4, 0.5))
    out = matrix @ np.array([1.0, 0.0, 0.0, 0.0])
    np.testing.assert_array_equal(out, np.array([0.0, 0.75, 0.0, 0.25]))


def test_rows_sum_to_one_for_admissible_lambda():
    grid = unit_grid()
    rng = np.random.default_rng(8)
    for _ in range(20):
        speeds = rng.uniform(-1.0, 1.0, grid.n_points)
        matrix = lax_friedrichs_matrix(grid, speeds)
        np.testing.assert_allclose(matrix.sum(axis=1), 1.0, rtol=0, atol=1e-14)


def test_cfl_violation_rejected():
    grid = unit_grid()
    speeds = np.ones(grid.n_points)
    speeds[13] = 1.01
    with pytest.raises(ValueError, match="CFL"):
        lax_friedrichs_matrix(grid, speeds)


def test_two_point_grid_row_sums():
    grid = make_grid(1.0, 2, 1.0, 1.0, 1)
    matrix = lax_friedrichs_matrix(grid, np.array([0.5, -0.25]))
    np.testing.assert_allclose(matrix.sum(axis=1), 1.0, rtol=0, atol=1e-14)


def test_model_step_unit_lambda_shifts_exactly():
    grid = unit_grid()
    state = np.sin(np.linspace(0, 3, grid.n_points))
    out = model_step(state, grid, ModelConfig(noise_var=0.0), np.ones(grid.n_points),
                     NoiseSource(0))
    assert np.array_equal(out, np.roll(state, 1))


def test_model_step_preserves_constant_state():
    grid = unit_grid()
    rng = np.random.default_rng(3)
    state = np.full(grid.n_points, -1.3)
    speeds = rng.uniform(-1, 1, grid.n_points)
    out = model_step(state, grid, ModelConfig(noise_var=0.0), speeds, NoiseSource(0))
    np.testing.assert_allclose(out, state, rtol=0, atol=1e-14)


def test_model_step_matches_dense_matrix_oracle():
    grid = unit_grid()
    rng = np.random.default_rng(4)
    state = rng.standard_normal(grid.n_points)
    speeds = rng.uniform(-1, 1, grid.n_points)
    lam = grid.dt / grid.dx * speeds
    n = grid.n_points
    dense = np.zeros((n, n))
    for row in range(n):
        dense[row, (row + 1) % n] += 0.5 * (1 - lam[row])
        dense[row, (row - 1) % n] += 0.5 * (1 + lam[row])
    out = model_step(state, grid, ModelConfig(noise_var=0.0), speeds, NoiseSource(0))
    np.testing.assert_allclose(out, dense @ state, rtol=0, atol=1e-14)


def test_model_step_max_principle_noise_free():
    grid = unit_grid()
    rng = np.random.default_rng(5)
    state = rng.standard_normal(grid.n_points)
    for trial in range(10):
        speeds = rng.uniform(-1, 1, grid.n_points)
        out = model_step(state, grid, ModelConfig(noise_var=0.0), speeds, NoiseSource(0))
        assert out.min() >= state.min() - 1e-12
        assert out.max() <= state.max() + 1e-12
        state = out


def test_model_step_noise_variance_scale():
    # per-step noise variance equals the configured covariance inflation
    grid = unit_grid(n_points=50)
    state = np.zeros(grid.n_points)
    cfg = ModelConfig(noise_var=0.08)
    draws = np.concatenate([
        model_step(state, grid, cfg, np.zeros(grid.n_points), NoiseSource(100 + k))
        for k in range(400)])
    observed = draws.var()
    assert abs(observed - 0.08) < 3 * 0.08 * np.sqrt(2 / draws.size)


def test_model_step_forcing_term():
    grid = unit_grid()
    state = np.zeros(grid.n_points)
    cfg = ModelConfig(noise_var=0.0, forcing=lambda t: np.full(grid.n_points, 2.0 + t))
    out = model_step(state, grid, cfg, np.zeros(grid.n_points), NoiseSource(0), time=1.0)
    np.testing.assert_allclose(out, grid.dt * 3.0, rtol=0, atol=1e-15)


def test_model_config_rejects_negative_variance():
    with pytest.raises(ValueError):
        ModelConfig(noise_var=-0.1)
