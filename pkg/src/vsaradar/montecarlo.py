"""Seeded Monte Carlo harness: trials, parameter sweeps and error metrics.

Every trial's random stream derives only from
``(base_seed, axis_index, trial_index, method)`` through
:class:`numpy.random.SeedSequence`, so aggregates do not depend on the
execution order or on the number of worker processes.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .geometry import RoomBounds
from .scenario import (
    GroundTruthTrack, TrajectorySpec, WaveformParams, default_radars, make_trajectory, sample_state,
)
from .signal import NoiseModel, measurement_channel
from .tracking import EkfTuning, VsaParams, track_ekf_baseline, track_trilateration, track_vsa

METHODS = ("trilateration", "ekf_baseline", "vsa")
SWEEP_AXES = ("snr_db", "outlier_prob", "clock_offset", "n_pri", "grid_points")
DEFAULT_SEED = 0xC0FFEE
# sampling step of the ground-truth track used for interpolation
TRUTH_STEP = 5e-3


class ExperimentError(ValueError):
    pass


class UnknownAxisError(ExperimentError):
    pass


class EmptyInputError(ExperimentError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    """Target motion and radar timing of an experiment.

    Parameters
    ----------
    trajectory : TrajectorySpec
        Ground-truth path.
    radar2_offset : float
        Hidden trigger offset of radar 2 relative to radar 1 (s).
    n_pri : int
        Chirps per frame (PRI held fixed).
    t_start : float
        First evaluated frame time on radar 1's clock (s). Earlier frames
        only provide the lead-in needed by delayed measurements.
    duration : float or None
        Evaluated span (s); None runs to the end of one traversal.
    """

    trajectory: TrajectorySpec = field(default_factory=TrajectorySpec)
    radar2_offset: float = 0.010
    n_pri: int = 256
    t_start: float = 0.0
    duration: float | None = None
    bounds: RoomBounds = field(default_factory=RoomBounds)
    name: str = "custom"

    def __post_init__(self):
        if self.n_pri < 8:
            raise ExperimentError("n_pri must be >= 8")
        if self.t_start < 0:
            raise ExperimentError("t_start must be >= 0")
        if self.duration is not None and self.duration <= 0:
            raise ExperimentError("duration must be positive")

    @property
    def waveform(self) -> WaveformParams:
        return WaveformParams().with_chirps(self.n_pri)


@dataclass(frozen=True)
class SweepAxis:
    name: str
    values: tuple

    def __post_init__(self):
        if self.name not in SWEEP_AXES:
            raise UnknownAxisError(f"unknown sweep axis {self.name!r}; expected one of {SWEEP_AXES}")
        if len(self.values) == 0:
            raise ExperimentError("sweep values must be non-empty")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ExperimentError("sweep values must be strictly increasing")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    methods: tuple = ("vsa",)
    noise: NoiseModel = field(default_factory=NoiseModel)
    vsa_params: VsaParams = field(default_factory=VsaParams)
    ekf: EkfTuning = field(default_factory=EkfTuning)
    n_trials: int = 50
    base_seed: int = DEFAULT_SEED
    sweep: SweepAxis | None = None

    def __post_init__(self):
        if isinstance(self.methods, str):
            object.__setattr__(self, "methods", (self.methods,))
        if not self.methods or any(m not in METHODS for m in self.methods):
            raise ExperimentError(f"methods must be a non-empty subset of {METHODS}")
        if len(set(self.methods)) != len(self.methods):
            raise ExperimentError("duplicate methods")
        if self.n_trials < 1:
            raise ExperimentError("n_trials must be >= 1")
        if not (0 <= self.base_seed < 2**64):
            raise ExperimentError("base_seed must be an unsigned 64-bit integer")

    def at(self, axis: str, value) -> "ExperimentConfig":
        """Copy with one sweep parameter set to ``value``."""
        if axis == "snr_db":
            return replace(self, noise=replace(self.noise, snr_db=float(value)))
        if axis == "outlier_prob":
            return replace(self, noise=replace(self.noise, outlier_prob=float(value)))
        if axis == "clock_offset":
            return replace(self, scenario=replace(self.scenario, radar2_offset=float(value)))
        if axis == "n_pri":
            return replace(self, scenario=replace(self.scenario, n_pri=int(value)))
        if axis == "grid_points":
            return replace(self, vsa_params=replace(self.vsa_params, grid_points=int(value)))
        raise UnknownAxisError(f"unknown sweep axis {axis!r}")


@dataclass(frozen=True)
class TrialResult:
    trial_seed: tuple
    method: str
    per_frame_errors: np.ndarray
    rmse: float
    wall_time: float
    frames_coasted: int
    radial_velocity_errors: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass(frozen=True)
class SweepRow:
    axis_value: object
    method: str
    mean_rmse: float
    std_rmse: float
    mean_wall_time: float
    sigma_v: float


@dataclass(frozen=True)
class SweepTable:
    axis: str
    rows: list
    trials: dict = field(default_factory=dict, repr=False)

    def row(self, axis_value, method) -> SweepRow:
        for r in self.rows:
            if r.axis_value == axis_value and r.method == method:
                return r
        raise KeyError((axis_value, method))

    def series(self, method: str) -> list:
        return [r for r in self.rows if r.method == method]


# --------------------------------------------------------------------------
# Metrics

def rmse(errors: Sequence[float]) -> float:
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise EmptyInputError("rmse of an empty error list")
    return float(np.sqrt(np.mean(e**2)))


def error_cdf(errors: Sequence[float], n_points: int = 100) -> list[tuple[float, float]]:
    """Empirical CDF at ``n_points`` evenly spaced cumulative fractions.

    Returns ``(error level, fraction)`` pairs where the level is the
    smallest sample whose empirical CDF reaches the fraction, so the last
    pair is ``(max(errors), 1.0)``.
    """
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise EmptyInputError("CDF of an empty error list")
    if n_points < 1:
        raise ExperimentError("n_points must be >= 1")
    frac = np.arange(1, n_points + 1) / n_points
    levels = np.quantile(e, frac, method="inverted_cdf")
    return [(float(x), float(f)) for x, f in zip(levels, frac)]


# --------------------------------------------------------------------------
# Trials

def trial_seed(base_seed: int, axis_index: int, trial_index: int, method: str) -> tuple:
    return (int(base_seed), int(axis_index), int(trial_index), METHODS.index(method))


def _truth(cfg: ScenarioConfig, end: float) -> GroundTruthTrack:
    return make_trajectory(cfg.trajectory, TRUTH_STEP, duration=end + TRUTH_STEP)


def simulate_measurements(config: ExperimentConfig, rng: np.random.Generator):
    """Per-frame measurement lists and the matching truth on radar 1's clock.

    Chirps are transmitted continuously at the PRI. Frame ``k`` of a radar
    covers the window of one frame period centred on ``t_k + offset`` and
    is processed at the window's end from the last ``n_pri`` chirps, so the
    reported value is the target state at
    ``t_k + offset + (frame_period - CPI) / 2``. When the CPI is longer than
    a frame, consecutive frames share chirps; their thermal noise is then a
    moving sum over per-frame blocks and is correlated accordingly. The
    tracker fuses the frames as if they were aligned at ``t_k``.

    Returns ``(times, truth_positions, frames, radars, radial_truth)``.
    """
    sc = config.scenario
    wf = sc.waveform
    radars = default_radars(wf, sc.radar2_offset)
    fp = wf.frame_period
    shift = (fp - wf.cpi) / 2
    lead = max(0.0, -shift - min(r.clock_offset for r in radars))
    t0 = max(sc.t_start, math.ceil(lead / fp - 1e-9) * fp)
    if sc.duration is None:
        # one traversal is the natural end of the scenario
        span = make_trajectory(sc.trajectory, TRUTH_STEP).duration
        end = span - max(0.0, max(r.clock_offset for r in radars) + shift)
    else:
        end = t0 + sc.duration
    n = int(math.floor((end - t0) / fp + 1e-9)) + 1
    if n < 2:
        raise ExperimentError("scenario is too short for two frames")
    truth = _truth(sc, end + max(0.0, max(r.clock_offset for r in radars) + shift))
    times = t0 + np.arange(n) * fp
    blocks = max(1, int(round(wf.cpi / fp)))
    history = [[] for _ in radars]
    frames, radial_truth = [], []
    truth_pos = np.empty((n, 2))
    for k, t in enumerate(times):
        truth_pos[k] = sample_state(truth, t)[0]
        frame, vr = [], []
        for i, r in enumerate(radars):
            state = sample_state(truth, t + r.clock_offset + shift)
            normals = None
            if blocks > 1:
                # one fresh block per frame; the CPI spans the last `blocks` of them
                if not history[i]:
                    history[i] = list(rng.standard_normal((blocks - 1, 2)))
                history[i].append(rng.standard_normal(2))
                history[i] = history[i][-blocks:]
                normals = np.sum(history[i], axis=0) / math.sqrt(blocks)
            m = measurement_channel(r, state, config.noise, rng, frame_time=float(t), normals=normals)
            d = state[0] - r.pos
            vr.append(float(np.dot(state[1], d / np.hypot(*d))))
            frame.append(m)
        frames.append(frame)
        radial_truth.append(vr)
    return times, truth_pos, frames, radars, np.array(radial_truth)


def estimate(method: str, config: ExperimentConfig, frames, radars):
    """Run one estimator; returns an (n, 2) array of positions (NaN where missing) and the coast count."""
    sc = config.scenario
    if method == "trilateration":
        pts = track_trilateration(frames, radars, sc.bounds)
        out = np.array([p if p is not None else (np.nan, np.nan) for p in pts])
        return out, sum(p is None for p in pts)
    ekf = config.ekf.build(sc.waveform, config.noise, len(radars))
    if method == "ekf_baseline":
        trk = track_ekf_baseline(frames, radars, ekf, sc.bounds)
    elif method == "vsa":
        trk = track_vsa(frames, radars, config.vsa_params, ekf, sc.bounds)
    else:
        raise ExperimentError(f"unknown method {method!r}")
    return trk.positions(), trk.frames_coasted


def run_trial(config: ExperimentConfig, trial_index: int, method: str | None = None,
              axis_index: int = 0) -> TrialResult:
    """One seeded trial of one estimator."""
    method = method or config.methods[0]
    if method not in METHODS:
        raise ExperimentError(f"unknown method {method!r}")
    seed = trial_seed(config.base_seed, axis_index, trial_index, method)
    rng = np.random.default_rng(np.random.SeedSequence(list(seed)))
    times, truth, frames, radars, vr_true = simulate_measurements(config, rng)

    t0 = time.perf_counter()
    est, coasted = estimate(method, config, frames, radars)
    wall = time.perf_counter() - t0

    err = np.hypot(*(est - truth).T)
    err = err[np.isfinite(err)]
    good = np.array([[not m.is_outlier for m in f] for f in frames])
    vr_meas = np.array([[m.radial_velocity for m in f] for f in frames])
    return TrialResult(seed, method, err, rmse(err) if err.size else math.nan, wall, int(coasted),
                       (vr_meas - vr_true)[good])


def _trial_task(args):
    config, trial_index, method, axis_index = args
    return run_trial(config, trial_index, method, axis_index)


def _map(tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [_trial_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_trial_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def _nanstd(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.std(x[np.isfinite(x)])) if np.isfinite(x).any() else math.nan


def run_sweep(config: ExperimentConfig, jobs: int = 1) -> SweepTable:
    """Run every (axis value, method, trial) combination and aggregate.

    Without a sweep axis the table has axis ``"none"`` and one row per
    method. Rows report the mean and population std of trial RMSEs, the
    mean estimator wall time and the empirical radial-velocity error std
    of non-outlier measurements.
    """
    if config.sweep is None:
        axis, values, cfgs = "none", [None], [config]
    else:
        axis, values = config.sweep.name, list(config.sweep.values)
        cfgs = [config.at(axis, v) for v in values]
    tasks = [(c, t, m, i) for i, c in enumerate(cfgs) for m in config.methods for t in range(config.n_trials)]
    results = _map(tasks, jobs)

    rows, trials, pos = [], {}, 0
    for v in values:
        for m in config.methods:
            chunk = results[pos:pos + config.n_trials]
            pos += config.n_trials
            r = np.array([c.rmse for c in chunk])
            verr = np.concatenate([c.radial_velocity_errors for c in chunk])
            rows.append(SweepRow(v, m, float(np.nanmean(r)), _nanstd(r),
                                 float(np.mean([c.wall_time for c in chunk])),
                                 float(np.std(verr)) if verr.size else math.nan))
            trials[(v, m)] = chunk
    return SweepTable(axis, rows, trials)


def linear_fit_r2(x: Sequence[float], y: Sequence[float]) -> float:
    """Coefficient of determination of an ordinary least-squares line."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    ss_res = float(np.sum((y - a @ coef) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
