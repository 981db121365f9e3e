"""2D image synthesis by slicing the 3D volume along arbitrary planes.

The binding pixel convention (also for UI overlay alignment): pixel (i, j)
of a (w, h) image samples the plane at (s, t) = ((i+0.5)/w, (j+0.5)/h), and
the plane point for (s, t) is ``origin + (s-0.5)*width*u + t*depth*v``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .anatomy import ProstateModel
from .errors import BadResolution, InvalidParams
from .geometry import vec3
from .volume import Volume3D, sample_points

if TYPE_CHECKING:  # pragma: no cover
    from .probe import FanGeometry

ORTHO_TOL = 1e-9


class View(enum.Enum):
    PROBE = "probe"
    AXIAL = "axial"
    SAGITTAL = "sagittal"
    CORONAL = "coronal"


@dataclass(frozen=True)
class ImagePlane:
    """Oriented, bounded plane; u is the image x direction, v the depth."""

    origin: np.ndarray
    u_axis: np.ndarray
    v_axis: np.ndarray
    extent: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "origin", vec3(self.origin))
        object.__setattr__(self, "u_axis", vec3(self.u_axis))
        object.__setattr__(self, "v_axis", vec3(self.v_axis))
        object.__setattr__(self, "extent", (float(self.extent[0]), float(self.extent[1])))
        if abs(np.linalg.norm(self.u_axis) - 1.0) > ORTHO_TOL or abs(np.linalg.norm(self.v_axis) - 1.0) > ORTHO_TOL:
            raise InvalidParams("plane axes must be unit length")
        if abs(float(np.dot(self.u_axis, self.v_axis))) > ORTHO_TOL:
            raise InvalidParams("plane axes must be orthogonal")
        if self.extent[0] <= 0 or self.extent[1] <= 0:
            raise InvalidParams("plane extent must be positive")

    @property
    def normal(self) -> np.ndarray:
        return np.cross(self.u_axis, self.v_axis)

    def point_at(self, s: float, t: float) -> np.ndarray:
        w, d = self.extent
        return self.origin + (s - 0.5) * w * self.u_axis + t * d * self.v_axis


@dataclass(frozen=True)
class Image2D:
    """Grayscale slice; pixels float64 in [0,1], shape (h, w) row-major."""

    dims: tuple[int, int]
    pixels: np.ndarray
    plane: ImagePlane

    def __post_init__(self):
        w, h = self.dims
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.shape != (h, w):
            raise InvalidParams(f"pixel array shape {px.shape} != (h={h}, w={w})")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "dims", (int(w), int(h)))


def plane_grid(plane: ImagePlane, w: int, h: int) -> np.ndarray:
    """World sample points for each pixel center, shape (h, w, 3)."""
    s = (np.arange(w, dtype=np.float64) + 0.5) / w
    t = (np.arange(h, dtype=np.float64) + 0.5) / h
    ww, d = plane.extent
    su = (s - 0.5) * ww
    td = t * d
    pts = (
        plane.origin[None, None, :]
        + su[None, :, None] * plane.u_axis[None, None, :]
        + td[:, None, None] * plane.v_axis[None, None, :]
    )
    return pts


def extract_slice(vol: Volume3D, plane: ImagePlane, res: tuple[int, int]) -> Image2D:
    """Slice the volume: pixel (i,j) = trilinear sample at its plane point."""
    w, h = int(res[0]), int(res[1])
    if w < 2 or h < 2:
        raise BadResolution(f"resolution must be at least 2x2, got {w}x{h}")
    pts = plane_grid(plane, w, h)
    pixels = sample_points(vol, pts)
    return Image2D(dims=(w, h), pixels=pixels, plane=plane)


_CANONICAL_AXES = {
    View.AXIAL: (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])),
    View.SAGITTAL: (np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0])),
    View.CORONAL: (np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0])),
}


def canonical_plane(view: View, model: ProstateModel, extent: tuple[float, float]) -> ImagePlane:
    """Axis-aligned plane through the gland center.

    Normals: axial z, sagittal x, coronal y (world frame). The origin is
    placed so the gland center lands at image center, (s, t) = (0.5, 0.5).
    """
    if view not in _CANONICAL_AXES:
        raise InvalidParams(f"no canonical plane for view {view}")
    u, v = _CANONICAL_AXES[view]
    origin = model.center - 0.5 * float(extent[1]) * v
    return ImagePlane(origin=origin, u_axis=u, v_axis=v, extent=(float(extent[0]), float(extent[1])))


def apply_fan_mask(img: Image2D, fan: "FanGeometry") -> Image2D:
    """Zero pixels outside the sector footprint; inside pixels unchanged."""
    w, h = img.dims
    ww, d = img.plane.extent
    xi = ((np.arange(w) + 0.5) / w - 0.5) * ww
    eta = ((np.arange(h) + 0.5) / h) * d
    dx = xi[None, :] - fan.apex[0]
    dy = eta[:, None] - fan.apex[1]
    r = np.hypot(dx, dy)
    ang = np.arctan2(np.abs(dx), dy)  # angle from the +depth fan axis
    inside = (ang <= fan.angular_span / 2.0) & (r >= fan.min_depth) & (r <= fan.max_depth)
    return Image2D(dims=img.dims, pixels=np.where(inside, img.pixels, 0.0), plane=img.plane)


def project_to_plane(plane: ImagePlane, p) -> tuple[float, float, float]:
    """Orthogonal projection -> ((s, t) plane coords, signed normal distance mm)."""
    rel = vec3(p) - plane.origin
    w, d = plane.extent
    s = 0.5 + float(np.dot(rel, plane.u_axis)) / w
    t = float(np.dot(rel, plane.v_axis)) / d
    dist = float(np.dot(rel, plane.normal))
    return s, t, dist


def plane_point_from_projection(plane: ImagePlane, s: float, t: float, dist: float) -> np.ndarray:
    """Inverse of project_to_plane."""
    return plane.point_at(s, t) + dist * plane.normal
