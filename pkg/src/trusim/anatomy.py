"""Gland geometry: oriented ellipsoid model, chord clipping, 12-sector scheme.

All operations are pure over immutable values. Frame convention: gland frame
x is lateral (semi-axis a), y antero-posterior (b), z cranio-caudal (c) with
+z pointing base -> apex by default.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateSegment, InvalidParams, OutsideGland
from .geometry import is_rotation, vec3


class Side(enum.Enum):
    LEFT = "left"
    RIGHT = "right"


class Zone(enum.Enum):
    BASE = "base"
    MID = "mid"
    APEX = "apex"


class Track(enum.Enum):
    MEDIAL = "medial"
    LATERAL = "lateral"


@dataclass(frozen=True, order=True)
class SectorId:
    side: Side
    zone: Zone
    track: Track

    @property
    def key(self) -> str:
        return f"{self.side.value}-{self.zone.value}-{self.track.value}"

    @classmethod
    def from_key(cls, key: str) -> "SectorId":
        s, z, t = key.split("-")
        return cls(Side(s), Zone(z), Track(t))


ALL_SECTORS: tuple[SectorId, ...] = tuple(
    SectorId(side, zone, track) for side in Side for zone in Zone for track in Track
)
APEX_SECTORS: tuple[SectorId, ...] = tuple(s for s in ALL_SECTORS if s.zone is Zone.APEX)


@dataclass(frozen=True)
class ProstateModel:
    """Oriented ellipsoid gland. ``orientation`` maps gland frame to world."""

    center: np.ndarray
    semi_axes: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: np.eye(3))
    apex_direction: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        object.__setattr__(self, "center", vec3(self.center))
        object.__setattr__(self, "semi_axes", vec3(self.semi_axes))
        object.__setattr__(self, "orientation", np.asarray(self.orientation, dtype=np.float64))
        object.__setattr__(self, "apex_direction", vec3(self.apex_direction))
        if np.any(self.semi_axes <= 0):
            raise InvalidParams(f"semi-axes must be positive, got {self.semi_axes}")
        if not is_rotation(self.orientation):
            raise InvalidParams("orientation must be a proper rotation (det +1, orthonormal)")
        n = np.linalg.norm(self.apex_direction)
        if abs(n - 1.0) > 1e-9:
            raise InvalidParams("apex_direction must be a unit vector")

    def to_gland(self, p) -> np.ndarray:
        """World point -> gland-frame coordinates (mm)."""
        return self.orientation.T @ (vec3(p) - self.center)

    def to_world(self, q) -> np.ndarray:
        return self.orientation @ vec3(q) + self.center

    def normalized(self, p) -> np.ndarray:
        """World point -> (u, v, w) = gland coordinates over semi-axes."""
        return self.to_gland(p) / self.semi_axes

    def from_normalized(self, q) -> np.ndarray:
        return self.to_world(vec3(q) * self.semi_axes)


def contains(model: ProstateModel, p) -> bool:
    """Closed-surface containment: u^2 + v^2 + w^2 <= 1 in normalized coords."""
    q = model.normalized(p)
    return float(np.dot(q, q)) <= 1.0


@dataclass(frozen=True)
class GlandIntersection:
    """Result of clipping a segment against the gland ellipsoid."""

    length: float
    clipped: Optional[tuple[np.ndarray, np.ndarray]]

    @property
    def midpoint(self) -> Optional[np.ndarray]:
        if self.clipped is None:
            return None
        return 0.5 * (self.clipped[0] + self.clipped[1])


def segment_gland_intersection(model: ProstateModel, p0, p1) -> GlandIntersection:
    """Clip segment [p0, p1] against the gland; exact quadratic solution.

    Returns the Euclidean in-gland length and the clipped sub-segment, or
    length 0 with clipped=None when disjoint. Tangent / endpoint contact
    reports length 0 with a degenerate (point) clipped segment.
    """
    p0 = vec3(p0)
    p1 = vec3(p1)
    world_len = float(np.linalg.norm(p1 - p0))
    if world_len < 1e-9:
        raise DegenerateSegment("segment endpoints coincide within 1e-9 mm")
    q0 = model.normalized(p0)
    q1 = model.normalized(p1)
    d = q1 - q0
    a = float(np.dot(d, d))
    b = 2.0 * float(np.dot(q0, d))
    c = float(np.dot(q0, q0)) - 1.0
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return GlandIntersection(length=0.0, clipped=None)
    sq = np.sqrt(disc)
    t_lo = (-b - sq) / (2.0 * a)
    t_hi = (-b + sq) / (2.0 * a)
    lo = max(0.0, t_lo)
    hi = min(1.0, t_hi)
    if hi < lo:
        return GlandIntersection(length=0.0, clipped=None)
    pa = p0 + lo * (p1 - p0)
    pb = p0 + hi * (p1 - p0)
    return GlandIntersection(length=(hi - lo) * world_len, clipped=(pa, pb))


def distance_to_surface(model: ProstateModel, p) -> float:
    """Distance from an interior point to the ellipsoid surface.

    Closest surface point x solves x_i = e_i^2 q_i / (e_i^2 + lam) with lam
    the root of sum((e_i q_i / (e_i^2 + lam))^2) = 1 in (-min e^2, 0];
    found by bisection. Raises OutsideGland for exterior points.
    """
    q = model.to_gland(p)
    e = model.semi_axes
    phi = float(np.sum((q / e) ** 2))
    if phi > 1.0:
        raise OutsideGland("distance_to_surface expects an interior point")
    if float(np.dot(q, q)) < 1e-24:
        return float(np.min(e))
    e2 = [float(v) for v in e * e]
    eq = [float(v) for v in e * q]

    def g(lam: float) -> float:
        return sum((c / (s + lam)) ** 2 for c, s in zip(eq, e2)) - 1.0

    lo = -min(e2) * (1.0 - 1e-12)
    hi = 0.0
    if g(lo) < 0.0:
        # q is (numerically) orthogonal to the min axis; nudge it so the
        # root exists. Shifts the result by well under 1e-6 mm.
        idx = int(np.argmin(e2))
        qn = q.copy()
        qn[idx] = 1e-9 * float(np.min(e))
        q = qn
        eq = [float(v) for v in e * q]
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    x = np.array([s * c / (s + lam) for c, s in zip(q, e2)])
    return float(np.linalg.norm(x - q))


@dataclass(frozen=True)
class SectorScheme12:
    """2 sides x 3 zones x 2 tracks. Cuts are in normalized coordinates.

    Tie-breaks are fixed so scoring is deterministic: u >= 0 -> Right, zone
    boundaries attach to the more apical zone, |u| >= lateral_threshold ->
    Lateral.
    """

    lateral_threshold: float = 0.5
    axial_cuts: tuple[float, float] = (-1.0 / 3.0, 1.0 / 3.0)

    def __post_init__(self):
        if not 0.0 < self.lateral_threshold < 1.0:
            raise InvalidParams("lateral_threshold must be in (0, 1)")
        lo, hi = self.axial_cuts
        if not (-1.0 < lo < hi < 1.0):
            raise InvalidParams("axial_cuts must be strictly increasing inside (-1, 1)")


def classify_sector(model: ProstateModel, scheme: SectorScheme12, p) -> SectorId:
    """Sector of an interior point; raises OutsideGland otherwise."""
    q = model.normalized(p)
    if float(np.dot(q, q)) > 1.0:
        raise OutsideGland(f"point {vec3(p)} is outside the gland")
    u, _, w = q
    if model.apex_direction[2] < 0.0:
        w = -w
    side = Side.RIGHT if u >= 0.0 else Side.LEFT
    lo, hi = scheme.axial_cuts
    if w >= hi:
        zone = Zone.APEX
    elif w >= lo:
        zone = Zone.MID
    else:
        zone = Zone.BASE
    track = Track.LATERAL if abs(u) >= scheme.lateral_threshold else Track.MEDIAL
    return SectorId(side, zone, track)


def sector_normalized_box(scheme: SectorScheme12, sector: SectorId) -> tuple[tuple[float, float], tuple[float, float]]:
    """(u-range, w-range) of the sector in normalized coordinates (v spans [-1,1])."""
    lat = scheme.lateral_threshold
    if sector.track is Track.MEDIAL:
        u_lo, u_hi = 0.0, lat
    else:
        u_lo, u_hi = lat, 1.0
    if sector.side is Side.LEFT:
        u_lo, u_hi = -u_hi, -u_lo
    lo, hi = scheme.axial_cuts
    w_ranges = {Zone.BASE: (-1.0, lo), Zone.MID: (lo, hi), Zone.APEX: (hi, 1.0)}
    return (u_lo, u_hi), w_ranges[sector.zone]
