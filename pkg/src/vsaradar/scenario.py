"""Radar placement, waveform constants, trajectories and frame clocks.

Everything here is an immutable value; trajectory generation is a pure
function of its :class:`TrajectorySpec`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

#: Propagation speed used throughout the toolkit (m/s). The rounded value
#: keeps the nominal 0.10 m / 0.05 m/s resolutions exact.
SPEED_OF_LIGHT = 3.0e8


class ScenarioError(ValueError):
    """Invalid waveform, radar or trajectory description."""


@dataclass(frozen=True)
class WaveformParams:
    """FMCW chirp and frame constants shared by a radar node.

    The defaults describe a 60 GHz / 1.5 GHz radar with 256 chirps per
    50 ms frame. ``sample_rate`` defaults to ``samples_per_chirp /
    chirp_duration`` so that range bin ``m`` maps to ``c*m/(2B)``.

    The coherent processing interval ``chirps_per_frame * pri`` may exceed
    ``frame_period``; the chirp train is then processed as a sliding window
    that reaches back into earlier frames.
    """

    carrier_frequency: float = 60e9
    bandwidth: float = 1.5e9
    chirp_duration: float = 64e-6
    samples_per_chirp: int = 128
    chirps_per_frame: int = 256
    pri: float = 50e-3 / 256
    frame_period: float = 50e-3
    sample_rate: float | None = None

    def __post_init__(self):
        if self.sample_rate is None:
            object.__setattr__(self, "sample_rate", self.samples_per_chirp / self.chirp_duration)
        if self.bandwidth <= 0:
            raise ScenarioError("bandwidth must be positive")
        if self.carrier_frequency <= 0:
            raise ScenarioError("carrier_frequency must be positive")
        if self.samples_per_chirp < 2 or self.chirps_per_frame < 2:
            raise ScenarioError("need at least 2 samples per chirp and 2 chirps per frame")
        if self.chirp_duration <= 0 or self.pri <= 0 or self.frame_period <= 0:
            raise ScenarioError("durations must be positive")
        if self.pri < self.chirp_duration:
            raise ScenarioError("pri must not be shorter than the chirp")
        if self.samples_per_chirp / self.sample_rate > self.chirp_duration * (1 + 1e-9):
            raise ScenarioError("fast-time sampling window longer than the chirp")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def chirp_slope(self) -> float:
        return self.bandwidth / self.chirp_duration

    @property
    def range_resolution(self) -> float:
        return SPEED_OF_LIGHT / (2.0 * self.bandwidth)

    @property
    def cpi(self) -> float:
        """Coherent processing interval ``L * T_PRI`` (s)."""
        return self.chirps_per_frame * self.pri

    @property
    def velocity_resolution(self) -> float:
        return self.wavelength / (2.0 * self.chirps_per_frame * self.pri)

    @property
    def max_radial_velocity(self) -> float:
        return self.wavelength / (4.0 * self.pri)

    @property
    def max_range(self) -> float:
        """Largest range whose beat frequency stays below the (complex) sample rate."""
        return self.sample_rate * SPEED_OF_LIGHT / (2.0 * self.chirp_slope)

    def with_chirps(self, n_chirps: int) -> "WaveformParams":
        """Same waveform with ``n_chirps`` per frame at unchanged PRI."""
        return replace(self, chirps_per_frame=int(n_chirps))


@dataclass(frozen=True)
class RadarNode:
    """A monostatic SISO radar at a fixed 2D position.

    ``clock_offset`` is the (signed) trigger error of this node relative to
    the fusion clock; ``boresight`` optionally restricts the node to targets
    in its front half-plane.
    """

    id: int
    position: tuple[float, float]
    waveform: WaveformParams = field(default_factory=WaveformParams)
    clock_offset: float = 0.0
    boresight: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        if self.boresight is not None:
            b = np.asarray(self.boresight, dtype=float)
            n = float(np.hypot(*b))
            if n == 0:
                raise ScenarioError("boresight must be a nonzero vector")
            object.__setattr__(self, "boresight", (b[0] / n, b[1] / n))

    @property
    def pos(self) -> np.ndarray:
        return np.array(self.position)


def default_radars(waveform: WaveformParams | None = None, radar2_offset: float = 0.0) -> tuple[RadarNode, RadarNode]:
    """The two-node layout at (2, 0) m and (0, 2) m, facing into the room."""
    wf = waveform or WaveformParams()
    return (
        RadarNode(1, (2.0, 0.0), wf, 0.0, boresight=(0.0, 1.0)),
        RadarNode(2, (0.0, 2.0), wf, radar2_offset, boresight=(1.0, 0.0)),
    )


def check_distinct_positions(radars: Sequence[RadarNode]) -> None:
    for i, a in enumerate(radars):
        for b in radars[i + 1:]:
            if a.position == b.position:
                raise ScenarioError(f"radars {a.id} and {b.id} share a position")


# --------------------------------------------------------------------------
# Trajectories

SHAPES = ("rhombus", "circle", "star", "waypoints")
MIN_SPEED, MAX_SPEED = 0.2, 1.5


@dataclass(frozen=True)
class TrajectorySpec:
    """Shape and speed profile of a ground-truth target path.

    Shape parameters used per ``shape``:

    * ``rhombus``: ``center``, ``half_diagonals`` (x, y)
    * ``circle``: ``center``, ``radius``
    * ``star``: ``center``, ``star_points``, ``outer_radius``, ``inner_radius``
    * ``waypoints``: ``vertices``, ``closed``

    The target moves at ``cruise_speed`` and slows linearly to
    ``corner_speed`` within ``corner_blend_length`` of every vertex.
    """

    shape: str = "rhombus"
    center: tuple[float, float] = (2.5, 3.0)
    radius: float = 1.2
    half_diagonals: tuple[float, float] = (1.5, 1.5)
    star_points: int = 5
    outer_radius: float = 1.5
    inner_radius: float = 0.6
    vertices: tuple[tuple[float, float], ...] = ()
    closed: bool = False
    cruise_speed: float = 1.0
    corner_speed: float = 0.3
    corner_blend_length: float = 0.2

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ScenarioError(f"unknown shape {self.shape!r}")
        for name in ("cruise_speed", "corner_speed"):
            v = getattr(self, name)
            if not (MIN_SPEED <= v <= MAX_SPEED):
                raise ScenarioError(f"{name} must lie in [{MIN_SPEED}, {MAX_SPEED}] m/s")
        if self.corner_speed > self.cruise_speed:
            raise ScenarioError("corner_speed must not exceed cruise_speed")
        if self.corner_blend_length < 0:
            raise ScenarioError("corner_blend_length must be non-negative")
        if self.shape == "circle" and self.radius <= 0:
            raise ScenarioError("circle radius must be positive")
        if self.shape == "rhombus" and min(self.half_diagonals) <= 0:
            raise ScenarioError("rhombus half-diagonals must be positive")
        if self.shape == "star":
            if self.star_points < 3:
                raise ScenarioError("a star needs at least 3 points")
            if not (0 < self.inner_radius < self.outer_radius):
                raise ScenarioError("star radii must satisfy 0 < inner < outer")
        if self.shape == "waypoints":
            if len(self.vertices) < 2:
                raise ScenarioError("need at least two waypoints")
            v = np.asarray(self.vertices, dtype=float)
            if np.any(np.hypot(*np.diff(v, axis=0).T) == 0):
                raise ScenarioError("consecutive waypoints coincide")

    def polygon(self) -> np.ndarray:
        """Vertex list for polygonal shapes (not defined for circles)."""
        cx, cy = self.center
        if self.shape == "rhombus":
            a, b = self.half_diagonals
            return np.array([(cx, cy - b), (cx + a, cy), (cx, cy + b), (cx - a, cy)])
        if self.shape == "star":
            n = self.star_points
            ang = np.pi / 2 + np.arange(2 * n) * np.pi / n
            rad = np.where(np.arange(2 * n) % 2 == 0, self.outer_radius, self.inner_radius)
            return np.column_stack([cx + rad * np.cos(ang), cy + rad * np.sin(ang)])
        if self.shape == "waypoints":
            return np.asarray(self.vertices, dtype=float)
        raise ScenarioError("circle has no polygon")

    @property
    def is_closed(self) -> bool:
        return self.shape != "waypoints" or self.closed


@dataclass(frozen=True)
class GroundTruthTrack:
    """Uniformly time-sampled target states.

    ``positions`` and ``velocities`` have shape (n, 2).
    """

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    path_length: float = float("nan")
    # continuous path model of generated tracks, evaluated by sample_state
    source: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if len(self.times) < 2:
            raise ScenarioError("a track needs at least two samples")
        if np.any(np.diff(self.times) <= 0):
            raise ScenarioError("track timestamps must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def speeds(self) -> np.ndarray:
        return np.hypot(self.velocities[:, 0], self.velocities[:, 1])


class _Piece:
    """Stretch of a path where speed is linear in arc length."""

    __slots__ = ("leg", "s0", "length", "va", "vb", "t0", "duration")

    def __init__(self, leg, s0, length, va, vb, t0):
        self.leg, self.s0, self.length, self.va, self.vb, self.t0 = leg, s0, length, va, vb, t0
        if abs(vb - va) < 1e-12:
            self.duration = length / va
        else:
            self.duration = length * math.log(vb / va) / (vb - va)

    def advance(self, tau: float) -> tuple[float, float]:
        """Arc length travelled and speed after ``tau`` seconds in the piece."""
        if abs(self.vb - self.va) < 1e-12:
            return self.va * tau, self.va
        g = (self.vb - self.va) / self.length
        e = math.exp(g * tau)
        return self.va * (e - 1.0) / g, self.va * e


class _Path:
    """Arc-length parametrised path with a piecewise-linear speed profile."""

    def __init__(self, spec: TrajectorySpec):
        self.spec = spec
        self.legs = []  # (kind, data, length)
        if spec.shape == "circle":
            self.legs.append(("arc", (np.asarray(spec.center, float), spec.radius), 2 * np.pi * spec.radius))
            dist = [(math.inf, math.inf)]
        else:
            verts = spec.polygon()
            if spec.is_closed:
                # start mid-way along the first edge so every vertex is interior
                mid = 0.5 * (verts[0] + verts[1])
                pts = np.vstack([mid, verts[1:], verts[:1], mid[None, :]])
                corner = [False] + [True] * len(verts) + [False]
            else:
                pts = verts
                corner = [False] + [True] * (len(verts) - 2) + [False]
            seg_len = np.hypot(*np.diff(pts, axis=0).T)
            for a, b, length in zip(pts[:-1], pts[1:], seg_len):
                self.legs.append(("line", (a, (b - a) / length), float(length)))
            dist = [(self._to_corner(k, -1, corner, seg_len), self._to_corner(k, +1, corner, seg_len))
                    for k in range(len(seg_len))]
        self.length = float(sum(leg[2] for leg in self.legs))
        self.pieces: list[_Piece] = []
        t = 0.0
        for li, (leg, (before, after)) in enumerate(zip(self.legs, dist)):
            for s0, s1 in self._breaks(leg[2], before, after):
                p = _Piece(li, s0, s1 - s0, self._speed(s0, leg[2], before, after),
                           self._speed(s1, leg[2], before, after), t)
                self.pieces.append(p)
                t += p.duration
        self.duration = t
        self._piece_t0 = np.array([p.t0 for p in self.pieces])

    def _to_corner(self, k, step, corner, seg_len):
        """Path distance from the start (step=-1) or end (step=+1) of leg k to the nearest corner."""
        n = len(seg_len)
        d = 0.0
        for _ in range(n):
            vertex = k if step < 0 else k + 1
            if corner[vertex]:
                return d
            if not self.spec.is_closed:
                return math.inf
            k = (k + step) % n
            d += seg_len[k]
        return math.inf

    def _speed(self, s, length, before, after):
        spec = self.spec
        d = min(before + s, after + (length - s))
        if spec.corner_blend_length == 0 or d >= spec.corner_blend_length:
            return spec.cruise_speed
        return spec.corner_speed + (spec.cruise_speed - spec.corner_speed) * d / spec.corner_blend_length

    def _breaks(self, length, before, after):
        b = self.spec.corner_blend_length
        cand = {0.0, length}
        for s in (b - before, length - (b - after), 0.5 * (length + after - before)):
            if 0.0 < s < length:
                cand.add(s)
        pts = sorted(cand)
        return [(a, c) for a, c in zip(pts[:-1], pts[1:]) if c - a > 1e-12]

    def at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """State at ``t``; closed shapes repeat lap after lap."""
        return self.state(math.fmod(t, self.duration) if t > self.duration else t)

    def state(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        t = min(max(t, 0.0), self.duration)
        k = int(np.searchsorted(self._piece_t0, t, side="right")) - 1
        piece = self.pieces[max(k, 0)]
        ds, speed = piece.advance(min(t - piece.t0, piece.duration))
        kind, data, _ = self.legs[piece.leg]
        s = piece.s0 + min(ds, piece.length)
        if kind == "line":
            a, u = data
            return a + s * u, speed * u
        c, r = data
        th = s / r
        return c + r * np.array([math.cos(th), math.sin(th)]), speed * np.array([-math.sin(th), math.cos(th)])


def make_trajectory(spec: TrajectorySpec, frame_period: float, duration: float | None = None) -> GroundTruthTrack:
    """Sample ``spec`` every ``frame_period`` seconds.

    With ``duration=None`` the path is traversed exactly once. A longer
    ``duration`` repeats closed shapes lap after lap; a shorter one
    truncates the traversal.
    """
    if frame_period <= 0:
        raise ScenarioError("frame_period must be positive")
    if duration is not None and duration <= 0:
        raise ScenarioError("duration must be positive")
    path = _Path(spec)
    total = path.duration if duration is None else float(duration)
    if total > path.duration * (1 + 1e-12) and not spec.is_closed:
        raise ScenarioError("open path is shorter than the requested duration")
    n = int(math.floor(total / frame_period + 1e-9)) + 1
    times = np.arange(n) * frame_period
    pos = np.empty((n, 2))
    vel = np.empty((n, 2))
    for i, t in enumerate(times):
        pos[i], vel[i] = path.at(t)
    return GroundTruthTrack(times, pos, vel, path.length, source=path)


def sample_state(track: GroundTruthTrack, t: float) -> tuple[np.ndarray, np.ndarray]:
    """(position, velocity) at time ``t``.

    Tracks from :func:`make_trajectory` are evaluated on their continuous
    path, so corners are reproduced exactly between samples. For other
    tracks positions use cubic Hermite interpolation with the stored velocities as
    end-point tangents; velocities are interpolated linearly inside the
    enclosing segment. Sample timestamps are reproduced exactly.
    """
    times = track.times
    if not (times[0] - 1e-12 <= t <= times[-1] + 1e-12):
        raise ScenarioError(f"t={t} outside track span [{times[0]}, {times[-1]}]")
    if track.source is not None:
        return track.source.at(float(t))
    k = int(np.searchsorted(times, t, side="right")) - 1
    k = min(max(k, 0), len(times) - 2)
    t0, t1 = times[k], times[k + 1]
    if t == t0:
        return track.positions[k].copy(), track.velocities[k].copy()
    h = t1 - t0
    s = (t - t0) / h
    p0, p1 = track.positions[k], track.positions[k + 1]
    v0, v1 = track.velocities[k], track.velocities[k + 1]
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    p = h00 * p0 + h10 * h * v0 + h01 * p1 + h11 * h * v1
    v = (1 - s) * v0 + s * v1
    return p, v


def radar_frame_times(radar: RadarNode, n_frames: int) -> np.ndarray:
    """Actual trigger times of a node: ``k * frame_period + clock_offset``."""
    if n_frames <= 0:
        raise ScenarioError("n_frames must be positive")
    return np.arange(n_frames) * radar.waveform.frame_period + radar.clock_offset
