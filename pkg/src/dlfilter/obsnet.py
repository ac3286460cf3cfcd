"""Fixed sparse observation system: station subset, acquisition times, synthetic data."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .core import GridSpec, NoiseSource
from .truth import TruthField

__all__ = [
    "ObsNetwork",
    "Observation",
    "build_network",
    "sample_observations",
    "observation_matrix",
    "observations_by_step",
    "write_observations_csv",
    "read_observations_csv",
]


@dataclass(frozen=True)
class ObsNetwork:
    """Where and when measurements are taken, and how noisy they are.

    ``spatial_freq`` = 1/s selects every s-th station starting at index 0;
    ``temporal_freq`` = 1/q yields an acquisition every q model steps,
    starting at step q.
    """

    station_indices: tuple[int, ...]
    spatial_freq: Fraction
    temporal_freq: Fraction
    noise_var: float

    def __post_init__(self):
        idx = self.station_indices
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("station_indices must be strictly increasing")
        if self.noise_var <= 0:
            raise ValueError("noise_var must be positive")

    @property
    def n_stations(self) -> int:
        return len(self.station_indices)

    @property
    def step_stride(self) -> int:
        return int(1 / self.temporal_freq)


@dataclass(frozen=True)
class Observation:
    """One scalar measurement at a grid station and model-step index."""

    value: float
    station: int
    time_index: int
    variance: float

    def __post_init__(self):
        if self.variance <= 0:
            raise ValueError("observation variance must be positive")


def _stride(freq) -> int:
    """Invert a sampling frequency 1/s into the integer stride s."""
    frac = Fraction(freq) if not isinstance(freq, Fraction) else freq
    inv = 1 / frac
    if inv.denominator != 1 or inv <= 0:
        raise ValueError(f"frequency {freq} does not invert to a positive integer stride")
    return int(inv)


def build_network(grid: GridSpec, xi, tau, noise_var: float) -> ObsNetwork:
    """Select every (1/xi)-th station and every (1/tau)-th step."""
    space_stride = _stride(xi)
    step_stride = _stride(tau)
    if space_stride > grid.n_points:
        raise ValueError("spatial stride exceeds the number of stations")
    stations = tuple(range(0, grid.n_points, space_stride))
    return ObsNetwork(station_indices=stations, spatial_freq=Fraction(xi),
                      temporal_freq=Fraction(tau), noise_var=float(noise_var))


def sample_observations(truth: TruthField, net: ObsNetwork, src: NoiseSource,
                        max_step: int | None = None) -> list[Observation]:
    """Read the truth at every acquisition time/station and add N(0, R) noise.

    ``max_step`` bounds the acquisition times (the "present"); by default the
    whole truth record is observed.
    """
    last = truth.values.shape[0] - 1 if max_step is None else min(max_step, truth.values.shape[0] - 1)
    std = math.sqrt(net.noise_var)
    out = []
    for step in range(net.step_stride, last + 1, net.step_stride):
        draws = src.standard_normal(net.n_stations)
        for k, station in enumerate(net.station_indices):
            value = truth.values[step, station] + std * draws[k]
            out.append(Observation(value=float(value), station=station,
                                   time_index=step, variance=net.noise_var))
    return out


def observation_matrix(net: ObsNetwork, grid: GridSpec) -> np.ndarray:
    """Selector matrix H with one row per station: (H v)_k = v[station_k]."""
    h = np.zeros((net.n_stations, grid.n_points))
    h[np.arange(net.n_stations), list(net.station_indices)] = 1.0
    return h


def observations_by_step(observations: list[Observation]) -> dict[int, list[Observation]]:
    """Group observations by acquisition step, preserving order within a step."""
    grouped: dict[int, list[Observation]] = {}
    for obs in observations:
        grouped.setdefault(obs.time_index, []).append(obs)
    return grouped


def write_observations_csv(observations: list[Observation], path) -> None:
    with open(Path(path), "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["time_index", "station", "value", "variance"])
        for obs in observations:
            writer.writerow([obs.time_index, obs.station,
                             format(obs.value, ".17g"), format(obs.variance, ".17g")])


def read_observations_csv(path) -> list[Observation]:
    with open(Path(path), newline="") as handle:
        reader = csv.DictReader(handle)
        return [Observation(value=float(row["value"]), station=int(row["station"]),
                            time_index=int(row["time_index"]), variance=float(row["variance"]))
                for row in reader]
