"""Voxel volumes: trilinear sampling, BVOL file I/O, and phantom synthesis.

Intensities are normalized echo levels in [0, 1]; 8-bit quantization happens
only at the file boundary. Voxel (0,0,0) center sits at ``origin``; voxel
(i,j,k) center at ``origin + (i*sx, j*sy, k*sz)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np
from scipy.ndimage import gaussian_filter

from .anatomy import ProstateModel
from .errors import FormatError, InvalidParams

BVOL_MAGIC = "BVOL1"

# Echo level of the bright rectal-wall band at the probe entry face (min-z).
RECTAL_WALL_LEVEL = 0.85

# Margin (mm) the gland ellipsoid must keep from the volume boundary.
GLAND_MARGIN_MM = 2.0


@dataclass(frozen=True)
class Volume3D:
    """Regular voxel grid of scalar echo intensities with physical spacing.

    ``voxels`` has shape (nx, ny, nz), float64, read-only. The file payload
    ordering is x-fastest (row-major with x as the innermost axis).
    """

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float]
    voxels: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        spacing = tuple(float(s) for s in self.spacing)
        origin = tuple(float(o) for o in self.origin)
        if len(dims) != 3 or any(d < 2 for d in dims):
            raise InvalidParams(f"all dims must be >= 2, got {dims}")
        if any(s <= 0.0 for s in spacing):
            raise InvalidParams(f"all spacings must be > 0, got {spacing}")
        vox = np.ascontiguousarray(np.asarray(self.voxels, dtype=np.float64))
        if vox.shape != dims:
            raise InvalidParams(f"voxel array shape {vox.shape} != dims {dims}")
        if vox.size and (float(vox.min()) < 0.0 or float(vox.max()) > 1.0):
            raise InvalidParams("intensities must lie in [0, 1]")
        vox.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "voxels", vox)

    @property
    def extent_mm(self) -> tuple[float, float, float]:
        """Physical size covered by voxel centers plus one spacing per axis."""
        return tuple(d * s for d, s in zip(self.dims, self.spacing))

    def voxel_center(self, i: int, j: int, k: int) -> np.ndarray:
        return np.array(self.origin) + np.array([i, j, k]) * np.array(self.spacing)


@numba.njit(cache=True, fastmath=False)
def _trilinear_kernel(vox, gx, gy, gz, out):  # pragma: no cover - jitted
    nx, ny, nz = vox.shape
    for idx in range(gx.size):
        x = gx[idx]
        y = gy[idx]
        z = gz[idx]
        if x < 0.0 or x > nx - 1 or y < 0.0 or y > ny - 1 or z < 0.0 or z > nz - 1:
            out[idx] = 0.0
            continue
        i0 = int(np.floor(x))
        j0 = int(np.floor(y))
        k0 = int(np.floor(z))
        if i0 > nx - 2:
            i0 = nx - 2
        if j0 > ny - 2:
            j0 = ny - 2
        if k0 > nz - 2:
            k0 = nz - 2
        fx = x - i0
        fy = y - j0
        fz = z - k0
        c00 = vox[i0, j0, k0] * (1.0 - fx) + vox[i0 + 1, j0, k0] * fx
        c10 = vox[i0, j0 + 1, k0] * (1.0 - fx) + vox[i0 + 1, j0 + 1, k0] * fx
        c01 = vox[i0, j0, k0 + 1] * (1.0 - fx) + vox[i0 + 1, j0, k0 + 1] * fx
        c11 = vox[i0, j0 + 1, k0 + 1] * (1.0 - fx) + vox[i0 + 1, j0 + 1, k0 + 1] * fx
        c0 = c00 * (1.0 - fy) + c10 * fy
        c1 = c01 * (1.0 - fy) + c11 * fy
        out[idx] = c0 * (1.0 - fz) + c1 * fz


def sample_points(vol: Volume3D, points: np.ndarray) -> np.ndarray:
    """Trilinear interpolation at world points, shape (..., 3) -> (...).

    Points outside the voxel-center bounding box return 0 (out-of-field is
    anechoic). The cut at the box face is hard: interior interpolation is
    continuous, but stepping across the face jumps to 0.
    """
    pts = np.asarray(points, dtype=np.float64)
    shape = pts.shape[:-1]
    flat = pts.reshape(-1, 3)
    ox, oy, oz = vol.origin
    sx, sy, sz = vol.spacing
    gx = (flat[:, 0] - ox) / sx
    gy = (flat[:, 1] - oy) / sy
    gz = (flat[:, 2] - oz) / sz
    out = np.empty(flat.shape[0], dtype=np.float64)
    _trilinear_kernel(vol.voxels, np.ascontiguousarray(gx), np.ascontiguousarray(gy), np.ascontiguousarray(gz), out)
    return out.reshape(shape)


def sample_trilinear(vol: Volume3D, p) -> float:
    """Intensity at a single world point p (mm)."""
    return float(sample_points(vol, np.asarray(p, dtype=np.float64).reshape(1, 3))[0])


@dataclass(frozen=True)
class PhantomParams:
    """Synthesis parameters for an ultrasound-like prostate phantom.

    Defaults give a 160^3 volume at 0.5 mm (80 mm cube) with a ~41 cc gland,
    hypoechoic interior (gland_level < tissue_level), a hyperechoic capsule
    rim, and a bright band at the probe entry face (min-z).
    """

    volume_extent: tuple[float, float, float] = (80.0, 80.0, 80.0)
    spacing: float = 0.5
    gland_semi_axes: tuple[float, float, float] = (22.0, 18.0, 25.0)
    gland_center: tuple[float, float, float] = (40.0, 40.0, 40.0)
    gland_level: float = 0.30
    tissue_level: float = 0.55
    capsule_rim_width: float = 1.5
    capsule_gain: float = 1.6
    speckle_amplitude: float = 0.35
    speckle_correlation_length: float = 0.8
    rectal_wall_depth: float = 3.0

    def validate(self) -> None:
        a, b, c = self.gland_semi_axes
        cx, cy, cz = self.gland_center
        ex, ey, ez = self.volume_extent
        if a <= 0 or b <= 0 or c <= 0:
            raise InvalidParams("gland semi-axes must be positive")
        if self.spacing <= 0:
            raise InvalidParams("spacing must be positive")
        for lo, hi, r, name in (
            (cx - a, cx + a, ex, "x"),
            (cy - b, cy + b, ey, "y"),
            (cz - c, cz + c, ez, "z"),
        ):
            if lo < GLAND_MARGIN_MM or hi > r - GLAND_MARGIN_MM:
                raise InvalidParams(f"gland ellipsoid exceeds volume extent minus {GLAND_MARGIN_MM} mm margin on {name}")
        if not self.gland_level < self.tissue_level:
            raise InvalidParams("gland_level must be < tissue_level (gland is hypoechoic)")
        if self.speckle_amplitude < 0:
            raise InvalidParams("speckle_amplitude must be >= 0")
        if self.speckle_correlation_length <= 0:
            raise InvalidParams("speckle_correlation_length must be positive")
        if self.capsule_rim_width < 0 or self.rectal_wall_depth < 0:
            raise InvalidParams("widths must be >= 0")


def _phantom_model(params: PhantomParams) -> ProstateModel:
    return ProstateModel(
        center=np.array(params.gland_center),
        semi_axes=np.array(params.gland_semi_axes),
    )


def generate_phantom(params: PhantomParams, seed: int) -> tuple[Volume3D, ProstateModel]:
    """Synthesize a speckled phantom volume and the matching gland model.

    Deterministic for fixed (params, seed). Regions: background tissue, the
    hypoechoic gland ellipsoid, a hyperechoic capsule rim of the given width
    straddling the gland surface, and a bright rectal-wall band within
    ``rectal_wall_depth`` of the min-z face. The speckle texture is the
    magnitude of a low-pass-filtered complex Gaussian field, normalized to
    mean 1 and blended in with ``speckle_amplitude``.
    """
    params.validate()
    if seed < 0:
        raise InvalidParams("seed must be non-negative")
    dims = tuple(max(2, int(round(e / params.spacing))) for e in params.volume_extent)
    spacing = (params.spacing,) * 3
    origin = (0.0, 0.0, 0.0)

    xs = np.arange(dims[0]) * params.spacing
    ys = np.arange(dims[1]) * params.spacing
    zs = np.arange(dims[2]) * params.spacing
    cx, cy, cz = params.gland_center
    a, b, c = params.gland_semi_axes
    u = (xs - cx)[:, None, None] / a
    v = (ys - cy)[None, :, None] / b
    w = (zs - cz)[None, None, :] / c
    rho = np.sqrt(u * u + v * v + w * w)

    base = np.full(dims, params.tissue_level)
    base[rho <= 1.0] = params.gland_level

    if params.capsule_rim_width > 0.0:
        # approximate signed distance to the ellipsoid surface: (rho-1)/|grad rho|
        grad = np.sqrt((u / a) ** 2 + (v / b) ** 2 + (w / c) ** 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            dist = np.where(grad > 0, (rho - 1.0) * rho / np.where(grad > 0, grad, 1.0), np.inf)
        rim = np.abs(dist) <= params.capsule_rim_width / 2.0
        base[rim] = min(1.0, params.tissue_level * params.capsule_gain)

    if params.rectal_wall_depth > 0.0:
        wall = zs <= params.rectal_wall_depth
        base[:, :, wall] = RECTAL_WALL_LEVEL

    if params.speckle_amplitude > 0.0:
        rng = np.random.default_rng(seed)
        sigma_vox = params.speckle_correlation_length / params.spacing
        re = gaussian_filter(rng.standard_normal(dims), sigma_vox)
        im = gaussian_filter(rng.standard_normal(dims), sigma_vox)
        mag = np.hypot(re, im)
        mag /= mag.mean()
        tex = 1.0 + params.speckle_amplitude * (mag - 1.0)
        vox = np.clip(base * tex, 0.0, 1.0)
    else:
        vox = np.clip(base, 0.0, 1.0)

    return Volume3D(dims=dims, spacing=spacing, origin=origin, voxels=vox), _phantom_model(params)


def quantize_u8(values: np.ndarray) -> np.ndarray:
    """Intensity [0,1] -> uint8, round half up (deterministic)."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


def save_volume(vol: Volume3D, path) -> None:
    """Write BVOL v1: text header, blank line, then u8 voxels x-fastest."""
    header = "\n".join(
        [
            f"magic {BVOL_MAGIC}",
            "dims {} {} {}".format(*vol.dims),
            "spacing {} {} {}".format(*(repr(s) for s in vol.spacing)),
            "origin {} {} {}".format(*(repr(o) for o in vol.origin)),
            "",
            "",
        ]
    )
    payload = quantize_u8(vol.voxels).ravel(order="F").tobytes()
    Path(path).write_bytes(header.encode("ascii") + payload)


def load_volume(path) -> Volume3D:
    """Read a BVOL v1 file; raises FormatError on any inconsistency."""
    raw = Path(path).read_bytes()
    sep = raw.find(b"\n\n")
    if sep < 0:
        raise FormatError("missing header/payload separator")
    try:
        header_text = raw[:sep].decode("ascii")
    except UnicodeDecodeError as exc:
        raise FormatError(f"header is not ascii: {exc}") from exc
    fields: dict[str, list[str]] = {}
    for line in header_text.splitlines():
        parts = line.split()
        if not parts:
            continue
        fields[parts[0]] = parts[1:]
    if fields.get("magic") != [BVOL_MAGIC]:
        raise FormatError(f"bad magic {fields.get('magic')}")
    try:
        dims = tuple(int(x) for x in fields["dims"])
        spacing = tuple(float(x) for x in fields["spacing"])
        origin = tuple(float(x) for x in fields["origin"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad header field: {exc}") from exc
    if len(dims) != 3 or any(d < 2 for d in dims):
        raise FormatError(f"dims must be three values >= 2, got {dims}")
    if len(spacing) != 3 or any(s <= 0 for s in spacing):
        raise FormatError(f"spacing must be three positive values, got {spacing}")
    if len(origin) != 3:
        raise FormatError("origin must have three values")
    payload = raw[sep + 2 :]
    count = dims[0] * dims[1] * dims[2]
    if len(payload) != count:
        raise FormatError(f"payload has {len(payload)} bytes, header declares {count}")
    vox = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    vox = vox.reshape(dims, order="F")
    return Volume3D(dims=dims, spacing=spacing, origin=origin, voxels=vox)
