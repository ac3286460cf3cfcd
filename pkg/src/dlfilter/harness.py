"""Scenario configuration, end-to-end runs, metrics, and file outputs.

A run generates one truth realization, samples its observation network, and
advances three estimators over the same grid: a model-only trajectory (no
data), the Kalman filter, and the dynamic likelihood filter. Outputs are
plot-ready CSV files plus a JSON manifest that reproduces the run exactly.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .core import GridSpec, NoiseSource, StateEstimate, make_grid
from .dlf import LiveObservation, dlf_step
from .kalman import analysis, forecast
from .model import ModelConfig, model_step
from .obsnet import (Observation, build_network, observation_matrix,
                     observations_by_step, sample_observations, write_observations_csv)
from .truth import Drift, TruthConfig, TruthField, generate_truth, mean_speed, pulse_profile

__all__ = [
    "ScenarioConfig",
    "MetricTable",
    "RunResult",
    "default_config",
    "center_of_mass",
    "circular_distance",
    "run_scenario",
    "summarize_run",
    "sweep",
    "write_outputs",
    "load_config",
    "config_to_flat",
    "config_from_flat",
]

FLOAT_FMT = ".17g"


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a run needs: physics, discretization, network, seeds."""

    drift: Drift
    domain_length: float = 2.0
    n_points: int = 50
    cfl: float = 0.99
    n_steps: int = 200
    relax_rate: float = 0.01
    base_speed: float = 0.1
    speed_ramp: float = 0.01
    speed_noise: float = 0.02
    forcing_noise: float = 0.01
    pulse_center: float = 1.25
    init_var: float = 0.02
    model_noise_var: float = 0.08
    space_freq: Fraction = Fraction(1)
    time_freq: Fraction = Fraction(1)
    obs_var: float = 0.02
    seed_truth: int = 101
    seed_model: int = 202
    seed_obs: int = 303
    present_time: int | None = None
    model_mode: str = "stochastic"

    def __post_init__(self):
        object.__setattr__(self, "drift", Drift(self.drift))
        object.__setattr__(self, "space_freq", Fraction(self.space_freq))
        object.__setattr__(self, "time_freq", Fraction(self.time_freq))
        for name in ("obs_var", "model_noise_var", "init_var", "forcing_noise", "speed_noise"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.model_mode not in ("stochastic", "mean"):
            raise ValueError("model_mode must be 'stochastic' or 'mean'")
        if self.last_data_step > self.n_steps:
            raise ValueError("present_time cannot exceed n_steps")

    @property
    def last_data_step(self) -> int:
        return self.n_steps if self.present_time is None else self.present_time

    def truth_config(self) -> TruthConfig:
        return TruthConfig(drift=self.drift, relax_rate=self.relax_rate,
                           base_speed=self.base_speed, speed_ramp=self.speed_ramp,
                           speed_noise=self.speed_noise, forcing_noise=self.forcing_noise,
                           pulse_center=self.pulse_center, init_var=self.init_var)

    def reference_speed(self) -> float:
        """Speed bound used by the CFL condition to fix dt.

        OU: the largest station speed at t = 0. Accelerating: a fixed unit
        reference, which keeps a wide stability margin as the speed grows.
        """
        if self.drift is Drift.OU:
            return self.relax_rate * (self.domain_length - self.domain_length / self.n_points)
        return 1.0

    def grid(self) -> GridSpec:
        return make_grid(self.domain_length, self.n_points, self.cfl,
                         self.reference_speed(), self.n_steps)


def default_config(drift: Drift | str, **overrides) -> ScenarioConfig:
    """Canonical scenario for each drift family (pulse center, horizon)."""
    drift = Drift(drift)
    base = dict(drift=drift)
    if drift is Drift.OU:
        base.update(n_steps=200, pulse_center=1.25)
    else:
        base.update(n_steps=100, pulse_center=1.0)
    base.update(overrides)
    return ScenarioConfig(**base)


@dataclass(frozen=True)
class MetricTable:
    """Per-step diagnostics plus final-time difference fields."""

    com_truth: np.ndarray
    com_model: np.ndarray
    com_kf: np.ndarray
    com_dlf: np.ndarray
    trace_kf: np.ndarray
    trace_dlf: np.ndarray
    rmse_model: np.ndarray
    rmse_kf: np.ndarray
    rmse_dlf: np.ndarray
    final_diff_model: np.ndarray
    final_diff_kf: np.ndarray
    final_diff_dlf: np.ndarray


@dataclass(frozen=True)
class RunResult:
    config: ScenarioConfig
    grid: GridSpec
    truth: TruthField
    observations: list[Observation]
    model_only: np.ndarray            # (n_steps + 1, n_points)
    kf: list[StateEstimate]
    dlf: list[StateEstimate]
    metrics: MetricTable
    pool_trace: list[tuple] | None = None


def center_of_mass(field_values: np.ndarray, grid: GridSpec) -> float:
    """First circular moment of the positive part of the field.

    Working on the circle avoids seam artifacts when the pulse straddles the
    periodic boundary. Negative values only drop out of the weights; callers
    keep their raw fields.
    """
    weights = np.maximum(np.asarray(field_values, dtype=float), 0.0)
    total = weights.sum()
    if total <= 0:
        raise ValueError("center of mass undefined: field has no positive part")
    theta = 2.0 * math.pi * grid.positions / grid.domain_length
    angle = math.atan2(float(np.sum(weights * np.sin(theta))),
                       float(np.sum(weights * np.cos(theta))))
    return (grid.domain_length / (2.0 * math.pi) * angle) % grid.domain_length


def circular_distance(a: float, b: float, length: float) -> float:
    """Shortest periodic distance between two positions on [0, length)."""
    d = abs(a - b) % length
    return min(d, length - d)


def _rmse(estimate: np.ndarray, reference: np.ndarray) -> float:
    return float(np.sqrt(np.mean((estimate - reference) ** 2)))


def run_scenario(cfg: ScenarioConfig, collect_pool_trace: bool = False) -> RunResult:
    """Run truth, model-only, Kalman, and dynamic likelihood estimators once."""
    grid = cfg.grid()
    truth_cfg = cfg.truth_config()
    truth = generate_truth(grid, truth_cfg, NoiseSource(cfg.seed_truth))
    net = build_network(grid, cfg.space_freq, cfg.time_freq, cfg.obs_var)
    observations = sample_observations(truth, net, NoiseSource(cfg.seed_obs),
                                       max_step=cfg.last_data_step)
    fresh_by_step = observations_by_step(observations)
    obs_mat = observation_matrix(net, grid)
    model_cfg = ModelConfig(noise_var=cfg.model_noise_var)
    model_only_cfg = model_cfg if cfg.model_mode == "stochastic" else ModelConfig(noise_var=0.0)
    model_src = NoiseSource(cfg.seed_model)

    initial_mean = pulse_profile(grid, cfg.pulse_center)
    initial = StateEstimate(time_index=0, mean=initial_mean,
                            covariance=cfg.init_var * np.eye(grid.n_points))

    model_only = np.empty_like(truth.values)
    model_only[0] = initial_mean
    kf_states = [initial]
    dlf_states = [initial]
    pool: list[LiveObservation] = []
    trace_rows: list[tuple] | None = [] if collect_pool_trace else None

    for step in range(1, grid.n_steps + 1):
        t_prev = (step - 1) * grid.dt
        speeds = np.asarray(mean_speed(truth_cfg, grid.positions, t_prev), dtype=float)

        model_only[step] = model_step(model_only[step - 1], grid, model_only_cfg,
                                      speeds, model_src, time=t_prev)

        kf_est = forecast(kf_states[-1], grid, model_cfg, speeds)
        fresh = fresh_by_step.get(step, [])
        if fresh:
            kf_est = analysis(kf_est, fresh, obs_mat, cfg.obs_var)
        kf_states.append(kf_est)

        result = dlf_step(dlf_states[-1], pool, fresh, grid, model_cfg, truth_cfg)
        dlf_states.append(result.estimate)
        pool = result.pool
        if trace_rows is not None:
            winners = {id(d.source) for d in result.assembly.selection_trace.values()}
            for obs in pool:
                trace_rows.append((step, obs.origin_time, obs.position, obs.variance,
                                   int(id(obs) in winners)))

    metrics = _compute_metrics(grid, truth, model_only, kf_states, dlf_states)
    return RunResult(config=cfg, grid=grid, truth=truth, observations=observations,
                     model_only=model_only, kf=kf_states, dlf=dlf_states,
                     metrics=metrics, pool_trace=trace_rows)


def _compute_metrics(grid, truth, model_only, kf_states, dlf_states) -> MetricTable:
    rows = grid.n_steps + 1
    com_truth = np.array([center_of_mass(truth.values[n], grid) for n in range(rows)])
    com_model = np.array([center_of_mass(model_only[n], grid) for n in range(rows)])
    com_kf = np.array([center_of_mass(kf_states[n].mean, grid) for n in range(rows)])
    com_dlf = np.array([center_of_mass(dlf_states[n].mean, grid) for n in range(rows)])
    return MetricTable(
        com_truth=com_truth, com_model=com_model, com_kf=com_kf, com_dlf=com_dlf,
        trace_kf=np.array([s.trace for s in kf_states]),
        trace_dlf=np.array([s.trace for s in dlf_states]),
        rmse_model=np.array([_rmse(model_only[n], truth.values[n]) for n in range(rows)]),
        rmse_kf=np.array([_rmse(kf_states[n].mean, truth.values[n]) for n in range(rows)]),
        rmse_dlf=np.array([_rmse(dlf_states[n].mean, truth.values[n]) for n in range(rows)]),
        final_diff_model=model_only[-1] - truth.values[-1],
        final_diff_kf=kf_states[-1].mean - truth.values[-1],
        final_diff_dlf=dlf_states[-1].mean - truth.values[-1],
    )


def summarize_run(result: RunResult) -> dict[str, float]:
    """Scalar per-run summaries used by sweeps and comparisons."""
    m = result.metrics
    length = result.grid.domain_length
    com_err = lambda series: float(np.mean([circular_distance(a, b, length)
                                            for a, b in zip(series, m.com_truth)]))
    return {
        "rmse_model": float(np.mean(m.rmse_model)),
        "rmse_kf": float(np.mean(m.rmse_kf)),
        "rmse_dlf": float(np.mean(m.rmse_dlf)),
        "final_trace_kf": float(m.trace_kf[-1]),
        "final_trace_dlf": float(m.trace_dlf[-1]),
        "com_err_model": com_err(m.com_model),
        "com_err_kf": com_err(m.com_kf),
        "com_err_dlf": com_err(m.com_dlf),
    }


def sweep(base: ScenarioConfig, xi_list, tau_list, n_replicates: int) -> list[dict]:
    """Replicate-aggregated metrics over a grid of sampling frequencies.

    Replicate r shifts every seed by r, so realizations differ while the
    physical configuration stays fixed.
    """
    if n_replicates < 1:
        raise ValueError("need at least one replicate")
    rows = []
    for xi in xi_list:
        for tau in tau_list:
            summaries = []
            for rep in range(n_replicates):
                cfg = replace(base, space_freq=Fraction(xi), time_freq=Fraction(tau),
                              seed_truth=base.seed_truth + rep,
                              seed_model=base.seed_model + rep,
                              seed_obs=base.seed_obs + rep)
                summaries.append(summarize_run(run_scenario(cfg)))
            row: dict = {"xi": str(Fraction(xi)), "tau": str(Fraction(tau)),
                         "replicates": n_replicates}
            for key in summaries[0]:
                values = [s[key] for s in summaries]
                row[f"mean_{key}"] = float(np.mean(values))
                row[f"median_{key}"] = float(statistics.median(values))
            rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Config file handling: flat "key = value" text, or a manifest JSON.

_CONFIG_FIELDS = {f.name for f in fields(ScenarioConfig)}


def config_to_flat(cfg: ScenarioConfig) -> dict[str, str]:
    """Flatten a config to round-trippable strings (repr for floats)."""
    out = {}
    for f in fields(ScenarioConfig):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if isinstance(value, Drift):
            out[f.name] = value.value
        elif isinstance(value, Fraction):
            out[f.name] = str(value)
        elif isinstance(value, float):
            out[f.name] = repr(value)
        else:
            out[f.name] = str(value)
    return out


def config_from_flat(flat: dict[str, str]) -> ScenarioConfig:
    """Parse flat key/value strings; unknown keys are rejected."""
    unknown = set(flat) - _CONFIG_FIELDS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "drift" not in flat:
        raise ValueError("config must set 'drift'")
    kwargs: dict = {}
    ints = {"n_points", "n_steps", "seed_truth", "seed_model", "seed_obs", "present_time"}
    fracs = {"space_freq", "time_freq"}
    strings = {"drift", "model_mode"}
    for key, raw in flat.items():
        raw = str(raw).strip()
        if key in strings:
            kwargs[key] = raw
        elif key in ints:
            kwargs[key] = int(raw)
        elif key in fracs:
            kwargs[key] = Fraction(raw)
        else:
            kwargs[key] = float(raw)
    return ScenarioConfig(**kwargs)


def load_config(path) -> ScenarioConfig:
    """Load a scenario from flat key = value text or from a run manifest."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        manifest = json.loads(text)
        return config_from_flat(manifest["config"])
    flat: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key in flat:
            raise ValueError(f"{path}:{lineno}: duplicate key '{key}'")
        flat[key] = value
    return config_from_flat(flat)


# ---------------------------------------------------------------------------
# Outputs

def _write_trajectory(path: Path, trajectory: np.ndarray) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([f"station_{k}" for k in range(trajectory.shape[1])])
        for row in trajectory:
            writer.writerow([format(v, FLOAT_FMT) for v in row])


def read_trajectory(path) -> np.ndarray:
    with open(Path(path), newline="") as handle:
        reader = csv.reader(handle)
        next(reader)
        return np.array([[float(v) for v in row] for row in reader])


def write_outputs(result: RunResult, out_dir) -> list[Path]:
    """Write trajectories, metrics, observations, and the run manifest.

    Floats carry 17 significant digits so a re-read (and a re-run from the
    manifest) reproduces the values bit-exactly.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    m = result.metrics

    written = []
    trajectories = {
        "truth.csv": result.truth.values,
        "model.csv": result.model_only,
        "kf_mean.csv": np.array([s.mean for s in result.kf]),
        "dlf_mean.csv": np.array([s.mean for s in result.dlf]),
    }
    for name, data in trajectories.items():
        _write_trajectory(out / name, data)
        written.append(out / name)

    metrics_path = out / "metrics.csv"
    with open(metrics_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        columns = ["com_truth", "com_model", "com_kf", "com_dlf", "trace_kf", "trace_dlf",
                   "rmse_model", "rmse_kf", "rmse_dlf"]
        writer.writerow(["step"] + columns)
        for step in range(result.grid.n_steps + 1):
            writer.writerow([step] + [format(getattr(m, c)[step], FLOAT_FMT) for c in columns])
    written.append(metrics_path)

    diff_path = out / "final_diff.csv"
    with open(diff_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["station", "x", "diff_model", "diff_kf", "diff_dlf"])
        for k in range(result.grid.n_points):
            writer.writerow([k, format(result.grid.positions[k], FLOAT_FMT),
                             format(m.final_diff_model[k], FLOAT_FMT),
                             format(m.final_diff_kf[k], FLOAT_FMT),
                             format(m.final_diff_dlf[k], FLOAT_FMT)])
    written.append(diff_path)

    obs_path = out / "observations.csv"
    write_observations_csv(result.observations, obs_path)
    written.append(obs_path)

    if result.pool_trace is not None:
        trace_path = out / "pool_trace.csv"
        with open(trace_path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["step", "origin_time", "position", "variance", "selected"])
            for step, origin, pos, var, selected in result.pool_trace:
                writer.writerow([step, origin, format(pos, FLOAT_FMT),
                                 format(var, FLOAT_FMT), selected])
        written.append(trace_path)

    manifest = {
        "tool": "dlfilter",
        "version": __version__,
        "config": config_to_flat(result.config),
        "outputs": sorted(p.name for p in written),
        "float_format": FLOAT_FMT,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    written.append(manifest_path)
    return written


def write_sweep_csv(rows: list[dict], path) -> None:
    with open(Path(path), "w", newline="") as handle:
        writer = csv.writer(handle)
        header = list(rows[0])
        writer.writerow(header)
        for row in rows:
            writer.writerow([row[k] if isinstance(row[k], (str, int))
                             else format(row[k], FLOAT_FMT) for k in header])
