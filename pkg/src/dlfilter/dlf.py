"""Dynamic likelihood filter: advect past observations to the present and
use them, alongside fresh data, in a per-station multi-analysis.

A measurement made at station z and step m keeps informing later steps: its
location rides the mean characteristics (semi-Lagrangian), its variance
inflates with the forcing noise, and at every step the surviving pool is
projected onto stations, rank-ordered by uncertainty, and assimilated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
import scipy.linalg

from .core import GridSpec, StateEstimate
from .kalman import FilterError, forecast
from .model import ModelConfig
from .obsnet import Observation
from .truth import TruthConfig, mean_speed

__all__ = [
    "Weighting",
    "LiveObservation",
    "ProjectedDatum",
    "LikelihoodAssembly",
    "DlfStepResult",
    "propagate_observation",
    "propagate_variance",
    "viability_filter",
    "project",
    "rank_order",
    "multi_gain",
    "multi_analysis",
    "dlf_step",
    "POOL_CAP_FACTOR",
]

# Pool memory bound: at most POOL_CAP_FACTOR * n_points live observations,
# oldest evicted first.
POOL_CAP_FACTOR = 4

# Guards station = floor(position / dx) against positions that sit on a node
# up to rounding (e.g. station * dx fed back through the division).
_NODE_EPS = 1e-9


class Weighting(Enum):
    """How a continuous datum position maps onto grid stations."""

    NEAREST_LEFT = "nearest-left"  # whole datum to floor(position / dx)
    LINEAR = "linear"              # split over the bracketing pair by proximity


@dataclass(frozen=True)
class LiveObservation:
    """A measurement riding the flow: current position and inflated variance."""

    value: float
    position: float
    variance: float
    origin_time: int
    current_time: int

    def __post_init__(self):
        if self.variance <= 0:
            raise ValueError("live observation variance must be positive")
        if self.current_time < self.origin_time:
            raise ValueError("current_time cannot precede origin_time")


@dataclass(frozen=True)
class ProjectedDatum:
    """A live observation attached to one station, with its projection weight."""

    station: int
    value: float
    variance: float
    weight: float
    source: LiveObservation


@dataclass(frozen=True)
class LikelihoodAssembly:
    """Winning datum per informed station, ready for the multi-analysis."""

    informed_stations: tuple[int, ...]
    projected_values: np.ndarray
    projected_variances: np.ndarray
    selection_trace: dict[int, ProjectedDatum]

    def __post_init__(self):
        k = len(self.informed_stations)
        if len(set(self.informed_stations)) != k:
            raise ValueError("at most one datum per station")
        if self.projected_values.shape != (k,) or self.projected_variances.shape != (k,):
            raise ValueError("assembly arrays must match the informed station count")

    def __len__(self):
        return len(self.informed_stations)


@dataclass(frozen=True)
class DlfStepResult:
    estimate: StateEstimate
    pool: list[LiveObservation]
    assembly: LikelihoodAssembly


def propagate_observation(obs: LiveObservation, grid: GridSpec,
                          truth_cfg: TruthConfig) -> LiveObservation:
    """Advance the datum position one semi-Lagrangian step along the mean speed.

    The value is carried unchanged; the position uses the speed at the old
    position and time, then wraps periodically.
    """
    t = obs.current_time * grid.dt
    speed = float(mean_speed(truth_cfg, obs.position, t))
    new_pos = float(grid.wrap(obs.position + grid.dt * speed))
    return replace(obs, position=new_pos, current_time=obs.current_time + 1)


def propagate_variance(obs: LiveObservation, forcing_amp: float, dt: float) -> LiveObservation:
    """Inflate the datum variance by one step of forcing noise: += amp^2 * dt."""
    return replace(obs, variance=obs.variance + forcing_amp ** 2 * dt)


def viability_filter(live: list[LiveObservation], forecast_cov: np.ndarray,
                     grid: GridSpec) -> list[LiveObservation]:
    """Drop data whose variance exceeds the forecast variance at the nearest station."""
    diag = np.diag(forecast_cov)
    kept = []
    for obs in live:
        station = int(math.floor(obs.position / grid.dx + 0.5)) % grid.n_points
        if obs.variance <= diag[station]:
            kept.append(obs)
    return kept


def project(live: list[LiveObservation], grid: GridSpec,
            weighting: Weighting = Weighting.NEAREST_LEFT) -> list[ProjectedDatum]:
    """Attach each live observation to grid stations.

    NEAREST_LEFT assigns the whole datum to the node at floor(position / dx).
    LINEAR splits it across the bracketing pair with weight b = rem / dx on
    the right node; each fragment keeps the full variance.
    """
    out = []
    n = grid.n_points
    for obs in live:
        ratio = obs.position / grid.dx + _NODE_EPS
        left = int(math.floor(ratio)) % n
        frac = ratio - math.floor(ratio)
        if weighting is Weighting.NEAREST_LEFT or frac <= 2 * _NODE_EPS:
            out.append(ProjectedDatum(station=left, value=obs.value,
                                      variance=obs.variance, weight=1.0, source=obs))
        else:
            right = (left + 1) % n
            out.append(ProjectedDatum(station=left, value=(1.0 - frac) * obs.value,
                                      variance=obs.variance, weight=1.0 - frac, source=obs))
            out.append(ProjectedDatum(station=right, value=frac * obs.value,
                                      variance=obs.variance, weight=frac, source=obs))
    return out


def rank_order(projected: list[ProjectedDatum]) -> LikelihoodAssembly:
    """Keep, per station, the candidate with the lowest variance.

    Candidates are scanned in order of increasing variance; a station takes
    the first datum offered to it and discards the rest.
    """
    winners: dict[int, ProjectedDatum] = {}
    for datum in sorted(projected, key=lambda d: d.variance):
        if datum.station not in winners:
            winners[datum.station] = datum
    stations = tuple(sorted(winners))
    return LikelihoodAssembly(
        informed_stations=stations,
        projected_values=np.array([winners[s].value for s in stations]),
        projected_variances=np.array([winners[s].variance for s in stations]),
        selection_trace=winners,
    )


def multi_gain(forecast_cov: np.ndarray, assembly: LikelihoodAssembly) -> np.ndarray:
    """Gain of the multi-analysis, restricted to the informed stations.

    On the informed subspace S the data reads the state directly, so the
    gain columns are P[:, S] (P[S, S] + diag(variances))^(-1); columns of
    uninformed stations are zero, the infinite-variance limit.
    """
    if len(assembly) == 0:
        raise ValueError("multi_gain needs a nonempty assembly")
    idx = np.array(assembly.informed_stations)
    restricted = forecast_cov[np.ix_(idx, idx)] + np.diag(assembly.projected_variances)
    try:
        columns = scipy.linalg.solve(restricted, forecast_cov[:, idx].T, assume_a="pos").T
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise FilterError("singular restricted system in the multi-gain") from exc
    gain = np.zeros((forecast_cov.shape[0],) * 2)
    gain[:, idx] = columns
    return gain


def multi_analysis(forecast_est: StateEstimate, assembly: LikelihoodAssembly) -> StateEstimate:
    """Condition the forecast on the assembled per-station data.

    The innovation lives only on informed stations; an empty assembly leaves
    the forecast untouched. Covariance update: (I - gain) P, re-symmetrized.
    """
    if len(assembly) == 0:
        return forecast_est
    gain = multi_gain(forecast_est.covariance, assembly)
    idx = np.array(assembly.informed_stations)
    innovation = np.zeros_like(forecast_est.mean)
    innovation[idx] = assembly.projected_values - forecast_est.mean[idx]
    mean = forecast_est.mean + gain @ innovation
    cov = (np.eye(mean.shape[0]) - gain) @ forecast_est.covariance
    cov = 0.5 * (cov + cov.T)
    return StateEstimate(time_index=forecast_est.time_index, mean=mean, covariance=cov)


def dlf_step(prev: StateEstimate, pool: list[LiveObservation], fresh: list[Observation],
             grid: GridSpec, model_cfg: ModelConfig, truth_cfg: TruthConfig,
             weighting: Weighting = Weighting.NEAREST_LEFT) -> DlfStepResult:
    """One full filter step: forecast, refresh the pool, assemble, analyze.

    The pool is advanced one step (position and variance), fresh measurements
    join it at their stations, non-viable members are shed, and the survivors
    are projected and rank-ordered into the assembly used by the
    multi-analysis. Survivors persist to the next step.
    """
    if any(obs.current_time != prev.time_index for obs in pool):
        raise ValueError("pool members must sit at the previous time index")
    t_prev = prev.time_index * grid.dt
    speeds = np.asarray(mean_speed(truth_cfg, grid.positions, t_prev), dtype=float)
    forecast_est = forecast(prev, grid, model_cfg, speeds)

    advanced = [propagate_variance(propagate_observation(obs, grid, truth_cfg),
                                   truth_cfg.forcing_noise, grid.dt)
                for obs in pool]
    now = prev.time_index + 1
    for obs in fresh:
        if obs.time_index != now:
            raise ValueError(f"fresh observation at step {obs.time_index}, expected {now}")
        advanced.append(LiveObservation(value=obs.value,
                                        position=obs.station * grid.dx,
                                        variance=obs.variance,
                                        origin_time=obs.time_index,
                                        current_time=now))

    survivors = viability_filter(advanced, forecast_est.covariance, grid)
    cap = POOL_CAP_FACTOR * grid.n_points
    if len(survivors) > cap:
        survivors = survivors[-cap:]

    assembly = rank_order(project(survivors, grid, weighting))
    estimate = multi_analysis(forecast_est, assembly)
    return DlfStepResult(estimate=estimate, pool=survivors, assembly=assembly)
