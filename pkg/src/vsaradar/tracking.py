"""Target state estimation.

* A constant-velocity EKF over ``x = [px, py, vx, vy]``.
* The velocity-synthesis-assisted (VSA) estimator: a grid search inside
  the range-gated region that keeps only candidate positions where the
  velocity synthesized from two consecutive frames is consistent, then
  picks the residual-minimising candidate. Its (position, velocity) output
  is the EKF measurement in :func:`track_vsa`.
* Baselines: frame-by-frame trilateration and a range-only EKF.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import (
    MAX_CONDITION, GeometryError, RoomBounds, los_unit, resolve_ambiguity, trilaterate,
)
from .scenario import RadarNode, WaveformParams
from .signal import NoiseModel, RadarMeasurement, range_sigma, velocity_sigma


class TrackingError(ValueError):
    pass


class SingularInnovationError(TrackingError):
    pass


class VsaError(TrackingError):
    pass


class EmptyRegionError(VsaError):
    """The range annuli do not overlap (inside the room)."""


class EmptyCandidateSetError(VsaError):
    """Every grid point failed the velocity-consistency check."""


# --------------------------------------------------------------------------
# EKF

@dataclass(frozen=True)
class EkfState:
    x: np.ndarray
    P: np.ndarray

    @property
    def position(self) -> np.ndarray:
        return self.x[:2]

    @property
    def velocity(self) -> np.ndarray:
        return self.x[2:]


def cv_transition(dt: float) -> np.ndarray:
    f = np.eye(4)
    f[0, 2] = f[1, 3] = dt
    return f


def white_noise_acceleration(q: float, dt: float) -> np.ndarray:
    """Process noise of a CV model driven by white acceleration of density ``q``."""
    blk = q * np.array([[dt**3 / 3, dt**2 / 2], [dt**2 / 2, dt]])
    out = np.zeros((4, 4))
    for axis in (0, 1):
        idx = np.ix_([axis, axis + 2], [axis, axis + 2])
        out[idx] = blk
    return out


@dataclass(frozen=True)
class EkfParams:
    """Filter noise model.

    ``R_range`` is used by range observations (one entry per radar),
    ``R_vsa`` by the direct (position, velocity) observation. The
    fallback position update in :func:`track_vsa` uses the position block
    of ``R_vsa`` times ``fallback_inflation``.
    """

    Q: np.ndarray
    dt: float
    R_range: np.ndarray
    R_vsa: np.ndarray
    fallback_inflation: float = 10.0
    initial_cov: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        if self.dt <= 0:
            raise TrackingError("dt must be positive")
        for name in ("Q", "R_range", "R_vsa", "initial_cov"):
            m = np.asarray(getattr(self, name), dtype=float)
            if not np.allclose(m, m.T):
                raise TrackingError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(m).min() < -1e-12:
                raise TrackingError(f"{name} must be positive semi-definite")

    @property
    def R_position(self) -> np.ndarray:
        return self.fallback_inflation * np.asarray(self.R_vsa)[:2, :2]


@dataclass(frozen=True)
class EkfTuning:
    """Filter tuning knobs; :meth:`build` turns them into :class:`EkfParams`.

    Measurement sigmas follow the waveform resolution and SNR, floored so
    that noiseless runs keep a positive-definite ``R``. ``R`` is computed
    for ``design_snr_db`` (a filter tuned once for its nominal operating
    point); ``None`` uses the actual SNR of the noise model instead.
    """

    process_noise_density: float = 0.5
    vsa_variance_scale: float = 2.0
    min_range_sigma: float = 0.01
    min_velocity_sigma: float = 0.01
    fallback_inflation: float = 10.0
    design_snr_db: float | None = 10.0

    def __post_init__(self):
        if self.process_noise_density < 0:
            raise TrackingError("process_noise_density must be >= 0")
        if self.vsa_variance_scale <= 0 or self.fallback_inflation <= 0:
            raise TrackingError("variance scales must be positive")
        if self.min_range_sigma <= 0 or self.min_velocity_sigma <= 0:
            raise TrackingError("sigma floors must be positive")

    def build(self, waveform: WaveformParams, noise: NoiseModel, n_radars: int = 2,
              dt: float | None = None) -> EkfParams:
        dt = waveform.frame_period if dt is None else dt
        snr = noise.snr_db if self.design_snr_db is None else self.design_snr_db
        sr = max(range_sigma(waveform, snr), self.min_range_sigma)
        sv = max(velocity_sigma(waveform, snr), self.min_velocity_sigma)
        k = self.vsa_variance_scale
        r_vsa = np.diag([k * sr**2, k * sr**2, k * sv**2, k * sv**2])
        return EkfParams(white_noise_acceleration(self.process_noise_density, dt), dt,
                         sr**2 * np.eye(n_radars), r_vsa, self.fallback_inflation)


def make_ekf_params(waveform: WaveformParams, noise: NoiseModel, n_radars: int = 2, **tuning) -> EkfParams:
    """Shorthand for ``EkfTuning(**tuning).build(waveform, noise, n_radars)``."""
    return EkfTuning(**tuning).build(waveform, noise, n_radars)


def _psd(p: np.ndarray) -> np.ndarray:
    p = 0.5 * (p + p.T)
    w, v = np.linalg.eigh(p)
    if w.min() < -1e-9 * max(1.0, abs(w).max()):
        raise TrackingError(f"covariance lost positive semi-definiteness (min eigenvalue {w.min():.3g})")
    if w.min() < 0:
        p = (v * np.maximum(w, 0.0)) @ v.T
        p = 0.5 * (p + p.T)
    return p


def ekf_predict(state: EkfState, params: EkfParams) -> EkfState:
    f = cv_transition(params.dt)
    return EkfState(f @ state.x, _psd(f @ state.P @ f.T + params.Q))


class LinearObservation:
    """``h(x) = H x``."""

    def __init__(self, h: np.ndarray):
        self.H = np.asarray(h, dtype=float)

    def __call__(self, x):
        return self.H @ x

    def jacobian(self, x):
        return self.H


DIRECT = LinearObservation(np.eye(4))
POSITION = LinearObservation(np.eye(2, 4))


class RangeObservation:
    """``h_i(x) = |p - r_i|`` with Jacobian rows ``[u_i^T, 0, 0]``."""

    def __init__(self, radar_positions: Sequence):
        self.radars = np.asarray(radar_positions, dtype=float)

    def __call__(self, x):
        return np.hypot(*(x[:2] - self.radars).T)

    def jacobian(self, x):
        u = los_unit(x[:2], self.radars)
        return np.hstack([u, np.zeros_like(u)])


def ekf_update(state: EkfState, z, h, R) -> EkfState:
    """EKF measurement update (Joseph form)."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    hj = h.jacobian(state.x)
    s = hj @ state.P @ hj.T + R
    if not np.all(np.isfinite(s)) or np.linalg.cond(s) > 1e15:
        raise SingularInnovationError("innovation covariance is singular")
    k = np.linalg.solve(s.T, (state.P @ hj.T).T).T
    x = state.x + k @ (z - h(state.x))
    a = np.eye(len(state.x)) - k @ hj
    p = a @ state.P @ a.T + k @ R @ k.T
    return EkfState(x, _psd(p))


# --------------------------------------------------------------------------
# VSA

@dataclass(frozen=True)
class VsaParams:
    """Grid-search settings.

    Parameters
    ----------
    delta : float
        Half-width of each range gate (m).
    grid_points : int
        Total grid points over the bounding box of the gated region.
    eps_d : float
        Largest accepted change of synthesized speed between frames (m/s).
    eps_theta : float
        Largest accepted change of synthesized heading (rad).
    residual_velocity_weight : float
        Weight of the radial-velocity residual in the position cost (s^2).
    """

    delta: float = 0.10
    grid_points: int = 100
    eps_d: float = 0.15
    eps_theta: float = math.radians(15.0)
    residual_velocity_weight: float = 0.01

    def __post_init__(self):
        if self.delta <= 0:
            raise TrackingError("delta must be positive")
        if self.grid_points < 4:
            raise TrackingError("grid_points must be >= 4")
        if self.eps_d <= 0:
            raise TrackingError("eps_d must be positive")
        # inf is accepted for both thresholds and disables the check
        if not (0 < self.eps_theta < math.pi or math.isinf(self.eps_theta)):
            raise TrackingError("eps_theta must lie in (0, pi) or be inf")

    @property
    def score_ratio(self) -> float:
        """Scale turning angle into speed units in the inconsistency score."""
        if math.isinf(self.eps_d) or math.isinf(self.eps_theta):
            return 1.0
        return self.eps_d / self.eps_theta


@dataclass(frozen=True)
class VsaGrid:
    points: np.ndarray        # (K, 2), full grid, row-major in y then x
    inside: np.ndarray        # (K,) bool, inside every range gate (and the room)
    cell: tuple[float, float]

    @property
    def cell_diagonal(self) -> float:
        return math.hypot(*self.cell)


@dataclass(frozen=True)
class VsaEstimate:
    position_prev: np.ndarray
    position_now: np.ndarray
    velocity: np.ndarray
    candidate_count: int
    mean_inconsistency: float
    grid_index: int
    cell_diagonal: float


def _gate_center(ranges, radar_pos, delta, bounds, reference):
    r1, r2 = float(ranges[0]), float(ranges[1])
    d = float(np.hypot(*(radar_pos[1] - radar_pos[0])))
    # widen or shrink within the gates so near-miss circles become tangent
    gap = d - (r1 + r2)
    if gap > 0:
        if gap > 2 * delta:
            raise EmptyRegionError("range gates do not overlap")
        r1, r2 = r1 + gap / 2, r2 + gap / 2
    excess = abs(r1 - r2) - d
    if excess > 0:
        if excess > 2 * delta:
            raise EmptyRegionError("range gates are nested")
        sgn = 1.0 if r1 > r2 else -1.0
        r1, r2 = r1 - sgn * excess / 2, r2 + sgn * excess / 2
    try:
        cands = trilaterate(max(r1, 1e-9), max(r2, 1e-9), radar_pos[0], radar_pos[1])
        if bounds is None:
            if reference is None or len(cands) == 1:
                return cands[0]
            ref = np.asarray(reference, dtype=float)
            return min(cands, key=lambda c: float(np.hypot(*(c - ref))))
        return resolve_ambiguity(cands, bounds, reference)
    except GeometryError as exc:
        raise EmptyRegionError(str(exc)) from exc


def vsa_grid(ranges: Sequence[float], radar_positions, params: VsaParams,
             bounds: RoomBounds | None = None, reference=None) -> VsaGrid:
    """Uniform grid over the bounding box of the gated region around the target.

    The box is taken around the trilateration solution selected by
    ``bounds``/``reference`` from the linearised range gates, so the mirror
    solution's lobe is excluded.
    """
    rp = np.asarray(radar_positions, dtype=float)
    rr = np.asarray(ranges, dtype=float)
    delta = params.delta
    c = _gate_center(rr, rp, delta, bounds, reference)
    u = los_unit(c, rp[:2])
    det = cross2(u[0], u[1])
    if abs(det) > 1e-6:
        uinv = np.linalg.inv(u)
        half = 1.1 * delta * np.abs(uinv).sum(axis=1)
    else:
        half = np.full(2, np.inf)
    half = np.minimum(half, 5.0 * delta)
    n = max(2, int(round(math.sqrt(params.grid_points))))
    xs = np.linspace(c[0] - half[0], c[0] + half[0], n)
    ys = np.linspace(c[1] - half[1], c[1] + half[1], n)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    dist = np.hypot(pts[:, None, 0] - rp[None, :, 0], pts[:, None, 1] - rp[None, :, 1])
    inside = np.all(np.abs(dist - rr[None, :]) <= delta, axis=1)
    if bounds is not None:
        inside &= bounds.contains(pts)
    return VsaGrid(pts, inside, (xs[1] - xs[0], ys[1] - ys[0]))


def cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def _pair_velocities(u_i, u_j, m_i, m_j):
    """Normal-equation solve of ``[u_i; u_j] v = [m_i; m_j]`` at every grid point."""
    a = np.stack([u_i, u_j], axis=1)                       # (K, 2, 2)
    c = np.abs(np.einsum("kd,kd->k", u_i, u_j))
    with np.errstate(divide="ignore"):
        cond = (1 + c) / (1 - c)
    valid = cond < MAX_CONDITION
    ata = np.einsum("kai,kaj->kij", a, a)
    ata[~valid] = np.eye(2)
    atb = np.einsum("kai,a->ki", a, np.array([m_i, m_j]))
    v = np.linalg.solve(ata, atb[..., None])[..., 0]
    return v, valid


def vsa_estimate(meas_prev: Sequence[RadarMeasurement], meas_now: Sequence[RadarMeasurement],
                 radars: Sequence[RadarNode], params: VsaParams, dt: float,
                 bounds: RoomBounds | None = RoomBounds(), reference=None) -> VsaEstimate:
    """Velocity-synthesis-assisted (position, velocity) estimate from two frames.

    ``meas_prev`` and ``meas_now`` hold one measurement per radar, in the
    order of ``radars``. ``reference`` (e.g. the EKF prediction) selects
    between the two trilateration lobes.
    """
    if len(radars) < 2 or len(meas_prev) != len(radars) or len(meas_now) != len(radars):
        raise TrackingError("need one measurement per radar in both frames, at least two radars")
    if dt <= 0:
        raise TrackingError("dt must be positive")
    rp = np.array([r.pos for r in radars])
    r_now = np.array([m.range for m in meas_now])
    v_prev = np.array([m.radial_velocity for m in meas_prev])
    v_now = np.array([m.radial_velocity for m in meas_now])

    grid = vsa_grid(r_now, rp, params, bounds, reference)
    idx = np.flatnonzero(grid.inside)
    if idx.size == 0:
        raise EmptyRegionError("no grid point inside every range gate")
    pts = grid.points[idx]
    d = pts[:, None, :] - rp[None, :, :]                  # (K, n, 2)
    rng = np.hypot(d[..., 0], d[..., 1])
    u = d / rng[..., None]

    ratio = params.score_ratio
    ok = np.ones(len(pts), dtype=bool)
    n_valid = np.zeros(len(pts), dtype=int)
    wsum = np.zeros(len(pts))
    vsum = np.zeros((len(pts), 2))
    incons = np.zeros(len(pts))
    for i, j in itertools.combinations(range(len(radars)), 2):
        v0, valid0 = _pair_velocities(u[:, i], u[:, j], v_prev[i], v_prev[j])
        vt, _ = _pair_velocities(u[:, i], u[:, j], v_now[i], v_now[j])
        n0 = np.hypot(*v0.T)
        nt = np.hypot(*vt.T)
        dd = np.abs(n0 - nt)
        dth = np.arctan2(np.abs(v0[:, 0] * vt[:, 1] - v0[:, 1] * vt[:, 0]),
                         v0[:, 0] * vt[:, 0] + v0[:, 1] * vt[:, 1])
        dth = np.where((n0 < 1e-6) | (nt < 1e-6), 0.0, dth)
        passed = (dd <= params.eps_d) & (dth <= params.eps_theta)
        ok &= passed | ~valid0
        score = dd + ratio * dth
        w = np.where(valid0, 1.0 / (score + 1e-6), 0.0)
        wsum += w
        vsum += w[:, None] * vt
        incons += np.where(valid0, score, 0.0)
        n_valid += valid0
    ok &= n_valid > 0
    if not ok.any():
        raise EmptyCandidateSetError("no grid point passed the velocity-consistency check")

    surv = np.flatnonzero(ok)
    vhat = vsum[surv] / wsum[surv, None]
    res_r = np.sum((rng[surv] - r_now[None, :]) ** 2, axis=1)
    res_v = np.sum((np.einsum("kd,knd->kn", vhat, u[surv]) - v_now[None, :]) ** 2, axis=1)
    cost = res_r + params.residual_velocity_weight * res_v
    best = int(np.argmin(cost))
    p_now = pts[surv[best]]
    v = vhat[best]
    return VsaEstimate(
        position_prev=p_now - v * dt,
        position_now=p_now.copy(),
        velocity=v.copy(),
        candidate_count=int(surv.size),
        mean_inconsistency=float(np.mean(incons[surv] / n_valid[surv])),
        grid_index=int(idx[surv[best]]),
        cell_diagonal=grid.cell_diagonal,
    )


# --------------------------------------------------------------------------
# Trackers

Frame = Sequence["RadarMeasurement | None"]


@dataclass
class Track:
    """Per-frame tracker output; ``states[k]`` is None before initialisation."""

    states: list
    modes: list

    def positions(self) -> np.ndarray:
        return np.array([s.position if s is not None else (np.nan, np.nan) for s in self.states])

    @property
    def frames_coasted(self) -> int:
        return sum(m == "coast" for m in self.modes)


def _complete(frame: Frame) -> bool:
    return frame is not None and all(m is not None for m in frame)


def _trilaterate_frame(frame: Frame, radars: Sequence[RadarNode], bounds: RoomBounds, previous=None):
    cands = trilaterate(frame[0].range, frame[1].range, radars[0].pos, radars[1].pos)
    return resolve_ambiguity(cands, bounds, previous)


def _initial_state(frame, radars, bounds, params: EkfParams):
    if not _complete(frame):
        return None
    try:
        p = _trilaterate_frame(frame, radars, bounds)
    except GeometryError:
        return None
    return EkfState(np.array([p[0], p[1], 0.0, 0.0]), np.asarray(params.initial_cov, dtype=float).copy())


def track_trilateration(frames: Sequence[Frame], radars: Sequence[RadarNode],
                        bounds: RoomBounds = RoomBounds()) -> list:
    """Frame-by-frame trilateration; ``None`` where it fails."""
    out, prev = [], None
    for frame in frames:
        p = None
        if _complete(frame):
            try:
                p = _trilaterate_frame(frame, radars, bounds, prev)
            except GeometryError:
                p = None
        if p is not None:
            prev = p
        out.append(p)
    return out


def track_ekf_baseline(frames: Sequence[Frame], radars: Sequence[RadarNode], ekf_params: EkfParams,
                       bounds: RoomBounds = RoomBounds()) -> Track:
    """CV EKF updated with the raw range pair of every frame."""
    h = RangeObservation([r.pos for r in radars])
    states, modes = [], []
    state = None
    for frame in frames:
        if state is None:
            state = _initial_state(frame, radars, bounds, ekf_params)
            states.append(state)
            modes.append("init" if state is not None else "none")
            continue
        state = ekf_predict(state, ekf_params)
        mode = "coast"
        if _complete(frame):
            z = [m.range for m in frame]
            try:
                state = ekf_update(state, z, h, ekf_params.R_range)
                mode = "update"
            except (SingularInnovationError, GeometryError):
                pass
        states.append(state)
        modes.append(mode)
    return Track(states, modes)


def track_vsa(frames: Sequence[Frame], radars: Sequence[RadarNode], vsa_params: VsaParams,
              ekf_params: EkfParams, bounds: RoomBounds = RoomBounds()) -> Track:
    """CV EKF fed with VSA (position, velocity) measurements.

    Per frame: predict; run the VSA estimator on the previous and current
    frame; update with ``z = [p, v]``. If no candidate survives the
    consistency check, the trilateration position is used with an inflated
    covariance. An empty gated region or a missed detection coasts.
    """
    states, modes = [], []
    state, prev = None, None
    for frame in frames:
        if state is None:
            state = _initial_state(frame, radars, bounds, ekf_params)
            states.append(state)
            modes.append("init" if state is not None else "none")
            prev = frame
            continue
        state = ekf_predict(state, ekf_params)
        mode = "coast"
        if _complete(frame) and _complete(prev):
            try:
                est = vsa_estimate(prev, frame, radars, vsa_params, ekf_params.dt, bounds, state.position)
                z = np.concatenate([est.position_now, est.velocity])
                state = ekf_update(state, z, DIRECT, ekf_params.R_vsa)
                mode = "vsa"
            except EmptyCandidateSetError:
                try:
                    p = _trilaterate_frame(frame, radars, bounds, state.position)
                    state = ekf_update(state, p, POSITION, ekf_params.R_position)
                    mode = "fallback"
                except (GeometryError, SingularInnovationError):
                    pass
            except (EmptyRegionError, SingularInnovationError):
                pass
        states.append(state)
        modes.append(mode)
        prev = frame
    return Track(states, modes)
