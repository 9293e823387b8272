"""Z-buffered point splatting of colored clouds into guidance frames.

Each point is projected and stamped over a circular pixel footprint; the
nearest camera-z wins per pixel, with exact-depth ties broken by the lower
point index so output is bit-stable.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ValidationError
from .geometry import Camera, DepthMap, Image, Mask, PointCloud, Z_NEAR

DEFAULT_SPLAT_RADIUS = 1


@dataclass(frozen=True)
class RenderedFrame:
    color: Image
    depth: DepthMap
    coverage: Mask

    def __post_init__(self):
        if self.depth.validity[~self.coverage.bits].any():
            raise ValidationError("depth must be invalid wherever coverage is false")


@lru_cache(maxsize=None)
def _disc_offsets(radius: int):
    """Integer pixel offsets within ``radius`` of the center pixel."""
    r = int(radius)
    span = np.arange(-r, r + 1)
    dx, dy = np.meshgrid(span, span)
    keep = dx * dx + dy * dy <= r * r
    return dx[keep].ravel(), dy[keep].ravel()


def render_cloud(cloud: PointCloud, camera: Camera, splat_radius: int = DEFAULT_SPLAT_RADIUS) -> RenderedFrame:
    """Render a colored point cloud under one camera.

    Background pixels are black with false coverage and invalid depth.
    """
    if splat_radius < 0:
        raise ValidationError(f"splat_radius must be >= 0, got {splat_radius}")
    H, W = camera.height, camera.width
    color = np.zeros((H, W, 3))
    depth = np.full((H, W), np.nan)
    cov = np.zeros(H * W, dtype=bool)
    if len(cloud) == 0:
        return RenderedFrame(Image(color), DepthMap(depth, cov.reshape(H, W)), Mask(cov.reshape(H, W)))

    u, v, z = camera.project_points(cloud.positions)
    keep = z > Z_NEAR
    idx = np.nonzero(keep)[0]
    if idx.size == 0:
        return RenderedFrame(Image(color), DepthMap(depth, cov.reshape(H, W)), Mask(cov.reshape(H, W)))
    ui = np.floor(u[idx]).astype(np.int64)
    vi = np.floor(v[idx]).astype(np.int64)
    zi = z[idx]

    dx, dy = _disc_offsets(splat_radius)
    n_off = dx.size
    # samples ordered point-major so stable z-sorting breaks ties by index
    px = (ui[:, None] + dx[None, :]).ravel()
    py = (vi[:, None] + dy[None, :]).ravel()
    pz = np.repeat(zi, n_off)
    src = np.repeat(idx, n_off)

    inb = (px >= 0) & (px < W) & (py >= 0) & (py < H)
    px, py, pz, src = px[inb], py[inb], pz[inb], src[inb]
    if px.size == 0:
        return RenderedFrame(Image(color), DepthMap(depth, cov.reshape(H, W)), Mask(cov.reshape(H, W)))

    order = np.argsort(pz, kind="stable")
    lin = py[order] * W + px[order]
    uniq, first = np.unique(lin, return_index=True)
    win = order[first]

    depth.reshape(-1)[uniq] = pz[win]
    color.reshape(-1, 3)[uniq] = cloud.colors[src[win]]
    cov[uniq] = True
    cov = cov.reshape(H, W)
    return RenderedFrame(Image(color), DepthMap(depth, cov), Mask(cov))


def render_sequence(
    cloud: PointCloud, cameras: list[Camera], splat_radius: int = DEFAULT_SPLAT_RADIUS
) -> list[RenderedFrame]:
    """Elementwise :func:`render_cloud` over a camera sequence."""
    if not cameras:
        raise ValidationError("render_sequence needs at least one camera")
    return [render_cloud(cloud, cam, splat_radius) for cam in cameras]
