"""Trilateration, line-of-sight projection and velocity-vector synthesis.

Vectors are 2D numpy arrays in a y-up frame. ``perp`` rotates a vector
90 degrees clockwise, ``(x, y) -> (y, -x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class GeometryError(ValueError):
    pass


class NoIntersectionError(GeometryError):
    """The two range circles are disjoint or nested."""


class CoincidentRadarsError(GeometryError):
    pass


class OutOfBoundsError(GeometryError):
    """Every trilateration candidate lies outside the room."""


class ZeroRangeError(GeometryError):
    pass


class CollinearLosError(GeometryError):
    """Line-of-sight directions too close to collinear for synthesis."""


class IllConditionedGeometryError(GeometryError):
    pass


#: Relative tolerance on the cross product of the two LoS directions.
COLLINEAR_TOL = 1e-9
#: Largest admissible condition number of the normal-equation matrix.
MAX_CONDITION = 1e6


@dataclass(frozen=True)
class RoomBounds:
    x_min: float = 0.0
    x_max: float = 5.0
    y_min: float = 0.0
    y_max: float = 6.0

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise GeometryError("room bounds must satisfy min < max")

    @property
    def center(self) -> np.ndarray:
        return np.array([(self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2])

    def contains(self, p, tol: float = 1e-12):
        p = np.asarray(p, dtype=float)
        return ((p[..., 0] >= self.x_min - tol) & (p[..., 0] <= self.x_max + tol)
                & (p[..., 1] >= self.y_min - tol) & (p[..., 1] <= self.y_max + tol))


@dataclass(frozen=True)
class RadialVelocityVector:
    """Signed radial speed along a unit line-of-sight direction."""

    magnitude: float
    unit_direction: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.unit_direction, dtype=float)
        n = float(np.hypot(*u))
        if n == 0:
            raise GeometryError("unit_direction must be nonzero")
        object.__setattr__(self, "unit_direction", u / n)

    @property
    def as_vector(self) -> np.ndarray:
        return self.magnitude * self.unit_direction

    @classmethod
    def from_projection(cls, velocity, unit: np.ndarray) -> "RadialVelocityVector":
        return cls(project_velocity(velocity, unit), unit)


def perp(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.stack([v[..., 1], -v[..., 0]], axis=-1)


def cross(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def trilaterate(r1: float, r2: float, radar1_pos, radar2_pos) -> list[np.ndarray]:
    """Intersection points of two range circles.

    Returns two points (one if the circles are tangent). The first point is
    on the left of the radar1 -> radar2 baseline.
    """
    if r1 <= 0 or r2 <= 0:
        raise GeometryError("ranges must be positive")
    c1 = np.asarray(radar1_pos, dtype=float)
    c2 = np.asarray(radar2_pos, dtype=float)
    base = c2 - c1
    d = float(np.hypot(*base))
    if d == 0:
        raise CoincidentRadarsError("radars coincide")
    a = (r1**2 - r2**2 + d**2) / (2 * d)
    h2 = r1**2 - a**2
    if h2 < -1e-12 * max(r1, r2) ** 2:
        raise NoIntersectionError(f"range circles r1={r1:.4g}, r2={r2:.4g} do not intersect (baseline {d:.4g})")
    e = base / d
    mid = c1 + a * e
    if h2 <= 0:
        return [mid]
    h = math.sqrt(h2)
    left = np.array([-e[1], e[0]])
    return [mid + h * left, mid - h * left]


def resolve_ambiguity(candidates: Sequence[np.ndarray], bounds: RoomBounds, previous_position=None) -> np.ndarray:
    """Pick the physically plausible trilateration solution.

    Out-of-room candidates are dropped; among the rest the one nearest
    ``previous_position`` (or the room centre when there is no history)
    wins.
    """
    if len(candidates) == 0:
        raise GeometryError("no candidates")
    inside = [np.asarray(c, dtype=float) for c in candidates if bounds.contains(c)]
    if not inside:
        raise OutOfBoundsError("all trilateration candidates are outside the room")
    if len(inside) == 1:
        return inside[0]
    ref = bounds.center if previous_position is None else np.asarray(previous_position, dtype=float)
    dist = [float(np.hypot(*(c - ref))) for c in inside]
    return inside[int(np.argmin(dist))]


def los_unit(target_p, radar_pos) -> np.ndarray:
    """Unit vector from a radar to the target."""
    d = np.asarray(target_p, dtype=float) - np.asarray(radar_pos, dtype=float)
    n = np.hypot(d[..., 0], d[..., 1])
    if np.any(n == 0):
        raise ZeroRangeError("target coincides with the radar")
    return d / n[..., None]


def project_velocity(v, u) -> float:
    """Radial component ``v . u``."""
    return float(np.dot(np.asarray(v, dtype=float), np.asarray(u, dtype=float)))


def synthesize_velocity_thales(v1: RadialVelocityVector, v2: RadialVelocityVector) -> np.ndarray:
    """Full velocity vector from two radial velocity vectors.

    The velocity is the diameter of the circle on which both radial vectors
    are chords from the origin:
    ``v = (|v1|^2 v2_perp - |v2|^2 v1_perp) / (v1 x v2)``.
    """
    u1, u2 = v1.unit_direction, v2.unit_direction
    m1, m2 = v1.magnitude, v2.magnitude
    s = cross(u1, u2)
    if abs(s) < COLLINEAR_TOL:
        raise CollinearLosError("line-of-sight directions are collinear")
    a1, a2 = v1.as_vector, v2.as_vector
    scale = max(abs(m1), abs(m2))
    if scale == 0:
        return np.zeros(2)
    den = cross(a1, a2)
    if abs(den) > COLLINEAR_TOL * scale**2:
        return (m1**2 * perp(a2) - m2**2 * perp(a1)) / den
    # one radial component vanishes: same expression with m1*m2 cancelled
    return (m1 * perp(u2) - m2 * perp(u1)) / s


def synthesize_velocity_lstsq(p, radar_positions: Sequence, radial_speeds: Sequence[float]) -> np.ndarray:
    """Least-squares velocity from ``u_i . v = v_i`` over all radars.

    Solved through the normal equations; the 2x2 normal matrix must have a
    condition number below :data:`MAX_CONDITION`.
    """
    if len(radar_positions) < 2 or len(radar_positions) != len(radial_speeds):
        raise GeometryError("need matching radar positions and speeds for at least two radars")
    u = np.array([los_unit(p, r) for r in radar_positions])
    b = np.asarray(radial_speeds, dtype=float)
    a = u.T @ u
    if np.linalg.cond(a) >= MAX_CONDITION:
        raise IllConditionedGeometryError("line-of-sight matrix is ill-conditioned")
    return np.linalg.solve(a, u.T @ b)


def position_covariance_factor(p, radar_positions: Sequence) -> float:
    """Trace of ``(U^T U)^-1``: range-noise to position-variance amplification."""
    u = np.array([los_unit(p, r) for r in radar_positions])
    return float(np.trace(np.linalg.inv(u.T @ u)))
