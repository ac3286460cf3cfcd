"""Discrete forward model: one-step stochastic Lax-Friedrichs advection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import GridSpec, NoiseSource, gaussian_vector

__all__ = ["ModelConfig", "lax_friedrichs_matrix", "model_step"]

# Slack on the |lambda| <= 1 stability bound to absorb rounding in dt/dx.
_CFL_SLACK = 1e-12


@dataclass(frozen=True)
class ModelConfig:
    """Model noise level and optional deterministic forcing.

    ``noise_var`` is the per-step noise covariance scale: every step adds
    noise_var * I to the state covariance. ``forcing`` maps a time to a
    per-station forcing vector; None means unforced.
    """

    noise_var: float = 0.0
    forcing: Callable[[float], np.ndarray] | None = None

    def __post_init__(self):
        if self.noise_var < 0:
            raise ValueError("noise_var must be nonnegative")


def lax_friedrichs_matrix(grid: GridSpec, speeds: np.ndarray) -> np.ndarray:
    """Periodic Lax-Friedrichs one-step transition matrix.

    Row ``l`` holds (1 - lam_l)/2 at column l+1 and (1 + lam_l)/2 at column
    l-1 (mod N), with lam_l = dt/dx * speeds[l]. Rows sum to 1; positive
    speeds translate the field toward increasing station index.
    """
    speeds = np.asarray(speeds, dtype=float)
    if speeds.shape != (grid.n_points,):
        raise ValueError(f"speeds must have shape ({grid.n_points},)")
    lam = grid.dt / grid.dx * speeds
    worst = float(np.abs(lam).max())
    if worst > 1.0 + _CFL_SLACK:
        raise ValueError(f"CFL violated: max |dt/dx * c| = {worst:.6g} > 1")
    n = grid.n_points
    rows = np.arange(n)
    matrix = np.zeros((n, n))
    np.add.at(matrix, (rows, (rows + 1) % n), 0.5 * (1.0 - lam))
    np.add.at(matrix, (rows, (rows - 1) % n), 0.5 * (1.0 + lam))
    return matrix


def model_step(state: np.ndarray, grid: GridSpec, cfg: ModelConfig, speeds: np.ndarray,
               src: NoiseSource, time: float = 0.0) -> np.ndarray:
    """Advance the state one step: advection, forcing, additive model noise.

    The noise adds per-station variance ``cfg.noise_var`` per step, matching
    the covariance inflation used by the filters' forecast.
    """
    state = np.asarray(state, dtype=float)
    transition = lax_friedrichs_matrix(grid, speeds)
    out = transition @ state
    if cfg.forcing is not None:
        out = out + grid.dt * np.asarray(cfg.forcing(time), dtype=float)
    if cfg.noise_var > 0:
        out = out + gaussian_vector(src, grid.n_points, math.sqrt(cfg.noise_var))
    return out
