"""Pinhole cameras, raster containers, rays, back-projection, projection.

Conventions used everywhere in this package:

* right-handed camera frame, +z forward, +y down (image rows grow downward);
* world-to-camera transform is ``x_cam = R @ x_world + t``;
* pixel (u, v) has its center at continuous coordinates (u + 0.5, v + 0.5);
* "depth" is z-depth: the camera-frame z coordinate of a point, not the ray
  length.  Ray directions are scaled so their camera-frame z component is
  exactly 1, which makes ``origin + direction * d`` land at z-depth ``d``.

All containers freeze their arrays after construction; they are safe to share
across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ValidationError

# Points closer than this along the optical axis are treated as behind the
# camera by every projection in the package.
Z_NEAR = 1e-9

_ORTHO_TOL = 1e-9


def _frozen(arr: np.ndarray, dtype) -> np.ndarray:
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Camera:
    """Pinhole camera with world pose.

    ``rotation`` maps world to camera coordinates; ``translation`` is the
    camera-frame position of the world origin.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray
    translation: np.ndarray
    width: int
    height: int
    frame_index: int = 0

    def __post_init__(self):
        R = _frozen(self.rotation, np.float64)
        t = _frozen(self.translation, np.float64)
        if R.shape != (3, 3) or t.shape != (3,):
            raise ValidationError(f"camera pose must be 3x3 + 3, got {R.shape} / {t.shape}")
        if np.abs(R.T @ R - np.eye(3)).max() >= _ORTHO_TOL:
            raise ValidationError("camera rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) >= _ORTHO_TOL:
            raise ValidationError("camera rotation must have determinant +1")
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationError(f"focal lengths must be positive, got ({self.fx}, {self.fy})")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValidationError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} raster"
            )
        if self.width <= 0 or self.height <= 0 or self.frame_index < 0:
            raise ValidationError("raster size must be positive and frame_index >= 0")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates (-R^T t)."""
        return -self.rotation.T @ self.translation

    def pixel_directions(self, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
        """World-space ray directions (unit camera z) for pixel indices."""
        us = np.asarray(us, dtype=np.float64)
        vs = np.asarray(vs, dtype=np.float64)
        dx = (us + 0.5 - self.cx) / self.fx
        dy = (vs + 0.5 - self.cy) / self.fy
        d_cam = np.stack([dx, dy, np.ones_like(dx)], axis=-1)
        return d_cam @ self.rotation  # == (R^T @ d) per direction

    def direction_grid(self) -> np.ndarray:
        """(H, W, 3) world directions for every pixel center."""
        vs, us = np.mgrid[0 : self.height, 0 : self.width]
        return self.pixel_directions(us, vs)

    def project_points(self, positions: np.ndarray):
        """Project world points; returns continuous (u, v) and camera z."""
        p_cam = positions @ self.rotation.T + self.translation
        z = p_cam[..., 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.fx * p_cam[..., 0] / z + self.cx
            v = self.fy * p_cam[..., 1] / z + self.cy
        return u, v, z


def pixel_ray(camera: Camera, u: int, v: int):
    """Ray (origin, direction) through the center of pixel (u, v).

    The direction has camera-frame z equal to 1, so ``origin + direction * d``
    is the world point at z-depth ``d``.
    """
    if not (0 <= u < camera.width and 0 <= v < camera.height):
        raise ValidationError(f"pixel ({u}, {v}) outside {camera.width}x{camera.height} raster")
    direction = camera.pixel_directions(np.float64(u), np.float64(v))
    return camera.center, direction


@dataclass(frozen=True)
class DepthMap:
    """H x W z-depth raster with per-pixel validity.

    Scene depth maps carry positive values; normalized relative maps may reach
    down to 0.  Invalid pixels hold NaN internally.
    """

    values: np.ndarray
    validity: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        valid = np.array(self.validity, dtype=bool)
        if vals.ndim != 2 or valid.shape != vals.shape:
            raise DimensionError(f"depth {vals.shape} / validity {valid.shape} mismatch")
        if not np.all(np.isfinite(vals[valid])):
            raise ValidationError("valid depth values must be finite")
        vals = np.where(valid, vals, np.nan)
        vals.setflags(write=False)
        valid.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "validity", valid)

    @classmethod
    def from_values(cls, values: np.ndarray) -> "DepthMap":
        values = np.asarray(values, dtype=np.float64)
        return cls(values, np.isfinite(values))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class Mask:
    """H x W boolean raster; true marks selected (edited) pixels."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool)
        if bits.ndim != 2:
            raise DimensionError(f"mask must be 2-D, got shape {bits.shape}")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @classmethod
    def full(cls, height: int, width: int, value: bool = False) -> "Mask":
        return cls(np.full((height, width), value, dtype=bool))

    def complement(self) -> "Mask":
        return Mask(~self.bits)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def shape(self):
        return self.bits.shape

    @property
    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class Image:
    """H x W x 3 RGB raster, float values in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim != 3 or vals.shape[2] != 3:
            raise DimensionError(f"image must be HxWx3, got shape {vals.shape}")
        if not np.all((vals >= 0.0) & (vals <= 1.0)):
            raise ValidationError("image values must lie in [0, 1]")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def black(cls, height: int, width: int) -> "Image":
        return cls(np.zeros((height, width, 3), dtype=np.float64))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape[:2]


@dataclass(frozen=True)
class PointCloud:
    """Colored world-space points with pixel provenance."""

    positions: np.ndarray
    colors: np.ndarray
    source_pixel: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64).reshape(-1, 3)
        col = np.array(self.colors, dtype=np.float64).reshape(-1, 3)
        src = self.source_pixel
        if src is None:
            src = np.full((pos.shape[0], 2), -1, dtype=np.int64)
        src = np.array(src, dtype=np.int64).reshape(-1, 2)
        if not (pos.shape[0] == col.shape[0] == src.shape[0]):
            raise DimensionError(
                f"positions/colors/source_pixel lengths differ: "
                f"{pos.shape[0]}/{col.shape[0]}/{src.shape[0]}"
            )
        if not np.all(np.isfinite(pos)):
            raise ValidationError("point positions must be finite")
        for arr in (pos, col, src):
            arr.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "colors", col)
        object.__setattr__(self, "source_pixel", src)

    def __len__(self) -> int:
        return self.positions.shape[0]

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 2), dtype=np.int64))


def _check_raster_sizes(camera: Camera, *rasters):
    for r in rasters:
        if (r.height, r.width) != (camera.height, camera.width):
            raise DimensionError(
                f"raster {r.width}x{r.height} does not match camera "
                f"{camera.width}x{camera.height}"
            )


def backproject(depth: DepthMap, image: Image, camera: Camera, select: Mask | None = None) -> PointCloud:
    """Lift selected valid depth pixels to colored world points.

    One point per pixel at ``origin + direction * depth[v, u]``, scanned in
    row-major order.  Pixels with invalid depth are skipped.
    """
    _check_raster_sizes(camera, depth, image)
    use = depth.validity
    if select is not None:
        if select.shape != depth.shape:
            raise DimensionError(f"select mask {select.shape} does not match depth {depth.shape}")
        use = use & select.bits
    vs, us = np.nonzero(use)
    if vs.size == 0:
        return PointCloud.empty()
    d = depth.values[vs, us]
    dirs = camera.pixel_directions(us, vs)
    positions = camera.center + dirs * d[:, None]
    colors = image.values[vs, us]
    source = np.stack([us, vs], axis=1)
    return PointCloud(positions, colors, source)


def project_depth(cloud: PointCloud, camera: Camera) -> DepthMap:
    """Z-buffered nearest-depth raster of a point cloud.

    Points behind the camera (z <= 0) are culled; exact depth ties keep the
    lowest point index, so output is deterministic.
    """
    H, W = camera.height, camera.width
    values = np.full((H, W), np.nan)
    if len(cloud) == 0:
        return DepthMap(values, np.zeros((H, W), dtype=bool))
    u, v, z = camera.project_points(cloud.positions)
    keep = z > Z_NEAR
    ui = np.floor(u[keep]).astype(np.int64)
    vi = np.floor(v[keep]).astype(np.int64)
    zk = z[keep]
    inb = (ui >= 0) & (ui < W) & (vi >= 0) & (vi < H)
    ui, vi, zk = ui[inb], vi[inb], zk[inb]
    if ui.size == 0:
        return DepthMap(values, np.zeros((H, W), dtype=bool))
    order = np.argsort(zk, kind="stable")
    lin = vi[order] * W + ui[order]
    uniq, first = np.unique(lin, return_index=True)
    values.reshape(-1)[uniq] = zk[order][first]
    validity = np.zeros(H * W, dtype=bool)
    validity[uniq] = True
    return DepthMap(values, validity.reshape(H, W))
