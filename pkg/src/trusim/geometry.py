"""Small 3D kit: rotation matrices, rigid frames, rays, segment distances.

Conventions used throughout the package: column-vector points, rotation
matrices act on the left, frames map local coordinates to world.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ROTATION_TOL = 1e-9


def vec3(x, y=None, z=None) -> np.ndarray:
    """Coerce to a float64 (3,) vector."""
    if y is None:
        a = np.asarray(x, dtype=np.float64).reshape(3)
    else:
        a = np.array([x, y, z], dtype=np.float64)
    return a


def unit(v) -> np.ndarray:
    v = vec3(v)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    return v / n


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def is_rotation(m: np.ndarray, tol: float = ROTATION_TOL) -> bool:
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        return False
    if np.max(np.abs(m.T @ m - np.eye(3))) > tol:
        return False
    return np.linalg.det(m) > 0.0


def rotation_between(a, b) -> np.ndarray:
    """Minimal rotation taking unit vector a onto unit vector b (Rodrigues).

    Antiparallel inputs rotate pi about a deterministic perpendicular axis.
    """
    a = unit(a)
    b = unit(b)
    c = float(np.dot(a, b))
    axis = np.cross(a, b)
    s2 = float(np.dot(axis, axis))
    if s2 < 1e-24:
        if c > 0.0:
            return np.eye(3)
        # pick any axis perpendicular to a
        ref = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        axis = unit(np.cross(a, ref))
        return axis_angle(axis, np.pi)
    k = skew(axis)
    return np.eye(3) + k + k @ k * ((1.0 - c) / s2)


def skew(v) -> np.ndarray:
    x, y, z = vec3(v)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def axis_angle(axis, angle: float) -> np.ndarray:
    axis = unit(axis)
    k = skew(axis)
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def euler_yxz(m: np.ndarray) -> tuple[float, float, float]:
    """Decompose m = rot_y(yaw) @ rot_x(pitch) @ rot_z(roll).

    Returns (yaw, pitch, roll); pitch is taken in [-pi/2, pi/2].
    """
    m = np.asarray(m, dtype=np.float64)
    pitch = -np.arcsin(np.clip(m[1, 2], -1.0, 1.0))
    if abs(m[1, 2]) < 1.0 - 1e-12:
        yaw = np.arctan2(m[0, 2], m[2, 2])
        roll = np.arctan2(m[1, 0], m[1, 1])
    else:
        # gimbal degenerate: fold roll into yaw
        yaw = np.arctan2(-m[2, 0], m[0, 0])
        roll = 0.0
    return float(yaw), float(pitch), float(roll)


@dataclass(frozen=True)
class Frame:
    """Rigid transform (rotation + origin), local frame -> world."""

    rotation: np.ndarray
    origin: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64))
        object.__setattr__(self, "origin", vec3(self.origin))
        if not is_rotation(self.rotation, tol=1e-8):
            raise ValueError("Frame rotation is not a proper rotation")

    @property
    def x_axis(self) -> np.ndarray:
        return self.rotation[:, 0]

    @property
    def y_axis(self) -> np.ndarray:
        return self.rotation[:, 1]

    @property
    def z_axis(self) -> np.ndarray:
        return self.rotation[:, 2]

    def point_to_world(self, p) -> np.ndarray:
        return self.rotation @ vec3(p) + self.origin

    def vector_to_world(self, v) -> np.ndarray:
        return self.rotation @ vec3(v)

    def point_to_local(self, p) -> np.ndarray:
        return self.rotation.T @ (vec3(p) - self.origin)

    def matrix4(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.origin
        return m


@dataclass(frozen=True)
class Ray:
    """Half-line with unit direction."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", vec3(self.origin))
        object.__setattr__(self, "direction", unit(self.direction))

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


def point_segment_distance(p, a, b) -> float:
    """Euclidean distance from point p to segment [a, b]."""
    p, a, b = vec3(p), vec3(a), vec3(b)
    d = b - a
    dd = float(np.dot(d, d))
    if dd == 0.0:
        return float(np.linalg.norm(p - a))
    t = float(np.dot(p - a, d)) / dd
    t = min(1.0, max(0.0, t))
    return float(np.linalg.norm(p - (a + t * d)))
