"""Shared value types: periodic grid, state estimates, seeded Gaussian noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GridSpec",
    "StateEstimate",
    "NoiseSource",
    "make_grid",
    "gaussian_vector",
]

# Relative tolerance for the covariance symmetry invariant.
SYMMETRY_RTOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Equi-distant periodic 1-D lattice plus time-stepping metadata.

    Station ``l`` sits at ``x = l * dx`` for ``l = 0 .. n_points - 1``.
    Index arithmetic is mod ``n_points``; ``x = domain_length`` is the same
    point as ``x = 0``.
    """

    domain_length: float
    n_points: int
    dx: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if self.domain_length <= 0:
            raise ValueError("domain_length must be positive")
        if self.n_points < 2:
            raise ValueError("need at least 2 grid points")
        if self.dx != self.domain_length / self.n_points:
            raise ValueError("dx must equal domain_length / n_points exactly")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")

    @property
    def positions(self) -> np.ndarray:
        """Station coordinates ``l * dx``, shape (n_points,)."""
        return np.arange(self.n_points) * self.dx

    def wrap(self, x):
        """Map positions periodically into [0, domain_length)."""
        return np.mod(x, self.domain_length)


@dataclass(frozen=True)
class StateEstimate:
    """Mean state and full covariance at one time index."""

    time_index: int
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        if self.time_index < 0:
            raise ValueError("time_index must be nonnegative")
        n = mean.shape[0]
        if mean.ndim != 1 or cov.shape != (n, n):
            raise ValueError(f"mean/covariance shapes inconsistent: {mean.shape} vs {cov.shape}")
        scale = max(1.0, float(np.abs(cov).max()) if cov.size else 1.0)
        if float(np.abs(cov - cov.T).max()) > SYMMETRY_RTOL * scale:
            raise ValueError("covariance is not symmetric within tolerance")
        if float(np.diag(cov).min()) < -SYMMETRY_RTOL * scale:
            raise ValueError("covariance has a negative diagonal entry")

    @property
    def trace(self) -> float:
        return float(np.trace(self.covariance))


class NoiseSource:
    """Deterministic Gaussian stream keyed by (seed, stream_id).

    Identical keys replay the identical draw sequence. ``child(tag)`` derives
    an independent stream so that sub-components (forcing vs. wave-speed noise,
    say) never share draws and toggling one leaves the others untouched.
    """

    def __init__(self, seed: int, stream_id: int = 0, _lineage: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._lineage = tuple(int(t) for t in _lineage)
        self._rng = np.random.default_rng((self.seed, self.stream_id, *self._lineage))

    def child(self, tag: int) -> "NoiseSource":
        return NoiseSource(self.seed, self.stream_id, _lineage=(*self._lineage, tag))

    def standard_normal(self, n: int) -> np.ndarray:
        return self._rng.standard_normal(int(n))

    def __repr__(self):
        return f"NoiseSource(seed={self.seed}, stream_id={self.stream_id}, lineage={self._lineage})"


def make_grid(domain_length: float, n_points: int, cfl: float, max_speed: float,
              n_steps: int) -> GridSpec:
    """Build the periodic grid; the time step follows from the CFL number.

    ``dt = cfl * dx / max_speed`` where ``max_speed`` bounds the advection
    speed over the whole run.
    """
    if domain_length <= 0:
        raise ValueError("domain_length must be positive")
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    if not 0 < cfl <= 1:
        raise ValueError("cfl must lie in (0, 1]")
    if max_speed <= 0:
        raise ValueError("max_speed must be positive (dt would be unbounded)")
    dx = domain_length / n_points
    dt = cfl * dx / max_speed
    return GridSpec(domain_length=float(domain_length), n_points=int(n_points),
                    dx=dx, dt=dt, n_steps=int(n_steps))


def gaussian_vector(src: NoiseSource, n: int, stddev: float) -> np.ndarray:
    """Draw ``n`` independent N(0, stddev^2) samples from ``src``."""
    if stddev < 0:
        raise ValueError("stddev must be nonnegative")
    return stddev * src.standard_normal(n)
