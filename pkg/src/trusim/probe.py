"""Probe kinematics: 4-DOF pose about a fixed pivot (the anal fulcrum).

The rig base frame has its z axis along ``rest_axis`` (minimal rotation from
world z, fixed and documented). Pose rotations compose as yaw (about base y),
then pitch (about base x), then roll (about the probe axis):

    frame = Translate(pivot) . R_base . Ry(yaw) . Rx(pitch) . Rz(roll)
            . Translate(insertion * z)

so the pivot is a fixed point and the probe tip is the frame origin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParams, PoseOutOfRange
from .geometry import Frame, Ray, rot_x, rot_y, rot_z, rotation_between, vec3
from .reslice import ImagePlane


@dataclass(frozen=True)
class ProbePose:
    pitch: float = 0.0
    yaw: float = 0.0
    roll: float = 0.0
    insertion: float = 0.0


@dataclass(frozen=True)
class FanGeometry:
    """Sector-shaped US footprint in image-plane mm coordinates."""

    apex: tuple[float, float] = (0.0, -4.0)
    angular_span: float = math.radians(60.0)
    min_depth: float = 3.0
    max_depth: float = 72.0

    def __post_init__(self):
        if not 0.0 < self.angular_span <= math.pi:
            raise InvalidParams("angular_span must be in (0, pi]")
        if not 0.0 <= self.min_depth < self.max_depth:
            raise InvalidParams("need 0 <= min_depth < max_depth")


@dataclass(frozen=True)
class ProbeRig:
    """Fixed scene geometry: pivot, rest axis, limits, guide and image setup.

    Defaults: pivot on the min-z volume face at (40, 10, 0) aiming at the
    default phantom's gland center 50 mm away, 35 deg needle guide 8 mm back
    from the tip, 60x70 mm image.
    """

    pivot: tuple[float, float, float] = (40.0, 10.0, 0.0)
    rest_axis: tuple[float, float, float] = (0.0, 0.6, 0.8)
    limits: tuple[float, float, float] = (0.6, 0.6, 60.0)  # pitch, yaw, insertion
    guide_angle: float = math.radians(35.0)
    guide_offset: float = 8.0
    image_extent: tuple[float, float] = (60.0, 70.0)
    fan: FanGeometry = field(default_factory=FanGeometry)

    def __post_init__(self):
        if any(l <= 0 for l in self.limits):
            raise InvalidParams("limits must be positive")
        if not 0.0 < self.guide_angle < math.pi / 2.0:
            raise InvalidParams("guide_angle must be in (0, pi/2)")
        if self.image_extent[0] <= 0 or self.image_extent[1] <= 0:
            raise InvalidParams("image extents must be positive")
        base = rotation_between(np.array([0.0, 0.0, 1.0]), vec3(self.rest_axis))
        base.setflags(write=False)
        object.__setattr__(self, "_base_rotation", base)

    @property
    def pitch_max(self) -> float:
        return self.limits[0]

    @property
    def yaw_max(self) -> float:
        return self.limits[1]

    @property
    def insertion_max(self) -> float:
        return self.limits[2]

    @property
    def base_rotation(self) -> np.ndarray:
        """Minimal rotation taking world z onto rest_axis (cached)."""
        return self._base_rotation


def validate_pose(rig: ProbeRig, pose: ProbePose) -> None:
    """Raise PoseOutOfRange naming the violated limit; callers decide to clamp."""
    if abs(pose.pitch) > rig.pitch_max:
        raise PoseOutOfRange("pitch", pose.pitch, rig.pitch_max)
    if abs(pose.yaw) > rig.yaw_max:
        raise PoseOutOfRange("yaw", pose.yaw, rig.yaw_max)
    if not 0.0 <= pose.insertion <= rig.insertion_max:
        raise PoseOutOfRange("insertion", pose.insertion, rig.insertion_max)


def clamp_pose(rig: ProbeRig, pose: ProbePose) -> ProbePose:
    """Interactive variant of validate_pose: pin components to their limits."""
    return ProbePose(
        pitch=min(rig.pitch_max, max(-rig.pitch_max, pose.pitch)),
        yaw=min(rig.yaw_max, max(-rig.yaw_max, pose.yaw)),
        roll=pose.roll,
        insertion=min(rig.insertion_max, max(0.0, pose.insertion)),
    )


def pose_to_frame(rig: ProbeRig, pose: ProbePose) -> Frame:
    """Rigid transform probe frame -> world; origin is the probe tip."""
    validate_pose(rig, pose)
    rot = rig.base_rotation @ rot_y(pose.yaw) @ rot_x(pose.pitch) @ rot_z(pose.roll)
    origin = vec3(rig.pivot) + rot @ np.array([0.0, 0.0, pose.insertion])
    return Frame(rotation=rot, origin=origin)


def image_plane(rig: ProbeRig, pose: ProbePose) -> ImagePlane:
    """Probe-oriented plane: contains the probe axis, rotates with roll."""
    frame = pose_to_frame(rig, pose)
    return ImagePlane(
        origin=frame.origin,
        u_axis=frame.x_axis,
        v_axis=frame.z_axis,
        extent=rig.image_extent,
    )


def needle_ray(rig: ProbeRig, pose: ProbePose) -> Ray:
    """Guide ray: starts guide_offset behind the tip, tilted guide_angle
    toward probe x, so the needle track lies in the image plane."""
    frame = pose_to_frame(rig, pose)
    origin = frame.origin - rig.guide_offset * frame.z_axis
    direction = math.cos(rig.guide_angle) * frame.z_axis + math.sin(rig.guide_angle) * frame.x_axis
    return Ray(origin=origin, direction=direction)
