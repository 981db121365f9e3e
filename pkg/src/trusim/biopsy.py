"""Virtual biopsy gun: firing along the guide ray, core records, targeting.

A fire is an instantaneous percussion event: the needle tip sits at
``needle_depth`` along the guide ray, the core is cut from ``throw_start``
beyond the tip over ``core_length`` mm. Sector attribution uses the midpoint
of the in-gland clipped segment, so a core clipping the capsule credits the
sector actually sampled.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .anatomy import (
    GlandIntersection,
    ProstateModel,
    SectorId,
    SectorScheme12,
    classify_sector,
    sector_normalized_box,
    segment_gland_intersection,
)
from .errors import DepthOutOfRange, InfeasibleTarget, InvalidParams
from .geometry import euler_yxz, rotation_between, unit, vec3
from .probe import ProbePose, ProbeRig, needle_ray, validate_pose

# Sector-centroid targets are pulled radially inside this normalized radius
# so they stay interior and whole cores around them stay in-sector.
SECTOR_TARGET_MAX_RHO = 0.85

SOLVER_TOL_MM = 1e-6


@dataclass(frozen=True)
class GunParams:
    throw_start: float = 5.0
    core_length: float = 17.0
    max_reach: float = 70.0

    def __post_init__(self):
        if self.core_length <= 0:
            raise InvalidParams("core_length must be positive")
        if self.throw_start < 0:
            raise InvalidParams("throw_start must be >= 0")
        if self.max_reach < self.throw_start + self.core_length:
            raise InvalidParams("max_reach must cover throw_start + core_length")

    @property
    def max_depth(self) -> float:
        """Largest valid needle_depth."""
        return self.max_reach - self.core_length - self.throw_start


@dataclass(frozen=True)
class BiopsyCore:
    """Fired core segment; the persisted unit of a session."""

    id: Optional[int]
    fired_at: float
    pose: ProbePose
    p0: np.ndarray
    p1: np.ndarray
    in_gland_length: float
    gland_segment: Optional[tuple[np.ndarray, np.ndarray]]
    sector: Optional[SectorId]
    needle_depth: float

    def __post_init__(self):
        object.__setattr__(self, "p0", vec3(self.p0))
        object.__setattr__(self, "p1", vec3(self.p1))

    @property
    def midpoint(self) -> np.ndarray:
        """Midpoint used for spacing metrics: in-gland segment if present."""
        if self.gland_segment is not None:
            return 0.5 * (self.gland_segment[0] + self.gland_segment[1])
        return 0.5 * (self.p0 + self.p1)

    def with_id(self, core_id: int) -> "BiopsyCore":
        return BiopsyCore(
            id=core_id,
            fired_at=self.fired_at,
            pose=self.pose,
            p0=self.p0,
            p1=self.p1,
            in_gland_length=self.in_gland_length,
            gland_segment=self.gland_segment,
            sector=self.sector,
            needle_depth=self.needle_depth,
        )


def fire(
    rig: ProbeRig,
    pose: ProbePose,
    needle_depth: float,
    gun: GunParams,
    model: ProstateModel,
    scheme: SectorScheme12,
    fired_at: Optional[float] = None,
) -> BiopsyCore:
    """Fire the gun at the given pose and needle depth; pure computation.

    The record carries the clipped in-gland segment and the sector of its
    midpoint (absent when the core misses the gland entirely).
    """
    validate_pose(rig, pose)
    if not 0.0 <= needle_depth <= gun.max_depth:
        raise DepthOutOfRange(
            f"needle_depth={needle_depth:.6g} outside [0, {gun.max_depth:.6g}]"
        )
    ray = needle_ray(rig, pose)
    tip = ray.at(needle_depth)
    p0 = tip + gun.throw_start * ray.direction
    p1 = p0 + gun.core_length * ray.direction
    hit: GlandIntersection = segment_gland_intersection(model, p0, p1)
    sector = None
    if hit.length > 0.0:
        sector = classify_sector(model, scheme, hit.midpoint)
    return BiopsyCore(
        id=None,
        fired_at=time.time() if fired_at is None else fired_at,
        pose=pose,
        p0=p0,
        p1=p1,
        in_gland_length=hit.length,
        gland_segment=hit.clipped,
        sector=sector,
        needle_depth=needle_depth,
    )


def sector_midpoint_target(model: ProstateModel, scheme: SectorScheme12, sector: SectorId) -> np.ndarray:
    """Representative interior world point of a sector.

    Centroid of the sector's normalized-coordinate box, radially rescaled
    inside SECTOR_TARGET_MAX_RHO when the raw centroid falls too close to
    (or beyond) the capsule, then mapped back through the semi-axes and
    orientation. Classification of the result round-trips by construction
    for the default scheme; a scheme that breaks this raises.
    """
    (u_lo, u_hi), (w_lo, w_hi) = sector_normalized_box(scheme, sector)
    q = np.array([0.5 * (u_lo + u_hi), 0.0, 0.5 * (w_lo + w_hi)])
    if model.apex_direction[2] < 0.0:
        q[2] = -q[2]
    rho = float(np.linalg.norm(q))
    if rho > SECTOR_TARGET_MAX_RHO:
        q *= SECTOR_TARGET_MAX_RHO / rho
    p = model.from_normalized(q)
    if classify_sector(model, scheme, p) != sector:
        raise InvalidParams(f"scheme geometry leaves no representative point for {sector.key}")
    return p


def solve_pose_for_target(
    rig: ProbeRig, gun: GunParams, target, roll_hint: float = 0.0
) -> tuple[ProbePose, float]:
    """Pose and needle depth placing the core midpoint on the target.

    Primary branch keeps pitch = yaw = 0: roll aims the guide at the
    target's azimuth about the probe axis, the core travel follows from the
    target's polar angle, insertion from its range. When travel or insertion
    leaves its valid range the fallback clamps the travel and tilts the
    probe by the minimal rotation taking the nominal midpoint direction
    onto the target direction (decomposed as yaw.pitch.roll). Both branches
    are verified by forward computation; raises InfeasibleTarget otherwise.
    """
    target = vec3(target)
    base = rig.base_rotation
    v = base.T @ (target - vec3(rig.pivot))
    r = float(np.linalg.norm(v))
    if r < 1e-9:
        raise InfeasibleTarget("target coincides with the pivot")
    sin_a = math.sin(rig.guide_angle)
    cos_a = math.cos(rig.guide_angle)
    half = gun.throw_start + gun.core_length / 2.0
    m_min = half
    m_max = gun.max_reach - gun.core_length / 2.0
    cos_t = min(1.0, max(-1.0, v[2] / r))
    theta = math.acos(cos_t)

    def finish(pose: ProbePose, m: float) -> tuple[ProbePose, float]:
        depth = m - half
        core = _forward_midpoint(rig, gun, pose, depth)
        if np.linalg.norm(core - target) > SOLVER_TOL_MM:
            raise InfeasibleTarget(
                f"no pose within rig limits reaches {np.round(target, 3).tolist()}"
            )
        return pose, depth

    # primary: pitch = yaw = 0, roll = target azimuth about the probe axis
    m = r * math.sin(theta) / sin_a
    if m_min <= m <= m_max:
        insertion = r * math.cos(theta) - m * cos_a + rig.guide_offset
        if 0.0 <= insertion <= rig.insertion_max:
            roll = math.atan2(v[1], v[0]) if (abs(v[0]) + abs(v[1])) > 1e-12 else roll_hint
            try:
                return finish(ProbePose(0.0, 0.0, roll, insertion), m)
            except InfeasibleTarget:
                pass

    # fallback: clamp travel, re-solve insertion, tilt the probe to aim
    m = min(m_max, max(m_min, m))
    under = r * r - (m * sin_a) ** 2
    if under < 0.0:
        raise InfeasibleTarget("target too close to the pivot for the gun throw")
    insertion = rig.guide_offset - m * cos_a + math.sqrt(under)
    insertion = min(rig.insertion_max, max(0.0, insertion))
    nominal = np.array([m * sin_a, 0.0, insertion - rig.guide_offset + m * cos_a])
    rot = rotation_between(unit(nominal), unit(v))
    yaw, pitch, roll = euler_yxz(rot)
    if abs(pitch) > rig.pitch_max or abs(yaw) > rig.yaw_max:
        raise InfeasibleTarget("required tilt exceeds pitch/yaw limits")
    return finish(ProbePose(pitch, yaw, roll, insertion), m)


def _forward_midpoint(rig: ProbeRig, gun: GunParams, pose: ProbePose, depth: float) -> np.ndarray:
    ray = needle_ray(rig, pose)
    return ray.at(depth + gun.throw_start + gun.core_length / 2.0)
