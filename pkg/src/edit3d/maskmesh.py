"""3D mask mesh construction and per-frame binary rasterization.

The 2D edit mask is lifted to a closed "cylinder": a frontal surface at the
merged minimum depth (pulled toward the camera by epsilon), a planar back
surface at the uniform maximum edit depth (pushed away by epsilon), and side
walls along the mask boundary.  Rendering the mesh under each frame's camera
propagates the mask through the video.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, EmptyMaskError, IncompleteDepthError, ValidationError
from .geometry import Camera, DepthMap, Mask, Z_NEAR

DEFAULT_EPSILON = 0.02

FRONTAL, BACK, SIDE = 0, 1, 2
SURFACE_NAMES = ("frontal", "back", "side")

# Triangles whose 3D area falls below this are dropped as degenerate.
_MIN_AREA = 1e-12

# Camera-space near plane used when clipping triangles for rasterization.
_CLIP_Z = 1e-6


@dataclass(frozen=True)
class MaskMesh:
    """Triangle mesh bounding the 3D edit region."""

    vertices: np.ndarray  # (V, 3) world
    triangles: np.ndarray  # (T, 3) vertex indices
    surface_tags: np.ndarray  # (T,) FRONTAL | BACK | SIDE

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        tris = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        tags = np.array(self.surface_tags, dtype=np.uint8).reshape(-1)
        if tris.shape[0] != tags.shape[0]:
            raise DimensionError("one surface tag per triangle required")
        if tris.size and (tris.min() < 0 or tris.max() >= verts.shape[0]):
            raise ValidationError("triangle index out of range")
        for arr in (verts, tris, tags):
            arr.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)
        object.__setattr__(self, "surface_tags", tags)

    @property
    def triangle_count(self) -> int:
        return self.triangles.shape[0]


def merge_mask_depth(
    d_ori: DepthMap, d_edit: DepthMap, mask: Mask, epsilon: float = DEFAULT_EPSILON
) -> DepthMap:
    """Per mask pixel: minimum of the available depths, minus epsilon.

    Pixels outside the mask come out invalid; a mask pixel valid in neither
    input is an error.
    """
    if not (d_ori.shape == d_edit.shape == mask.shape):
        raise DimensionError(
            f"shapes differ: d_ori {d_ori.shape}, d_edit {d_edit.shape}, mask {mask.shape}"
        )
    neither = mask.bits & ~d_ori.validity & ~d_edit.validity
    if neither.any():
        v, u = np.argwhere(neither)[0]
        raise IncompleteDepthError(u, v, "mask pixel valid in neither depth map")
    merged = np.fmin(d_ori.values, d_edit.values)  # fmin ignores NaN where one side is valid
    merged = np.where(mask.bits, merged - epsilon, np.nan)
    return DepthMap(merged, mask.bits.copy())


def grid_boundary_edges(bits: np.ndarray):
    """4-connected mask-pixel pairs lying on the frontal-surface boundary.

    The frontal grid triangulation puts two triangles on every fully masked
    2x2 block (diagonal fixed top-left -> bottom-right).  An adjacent pixel
    pair is a boundary edge when fewer than two such blocks flank it; each
    boundary edge receives exactly one side quad.
    Returns (a_v, a_u, b_v, b_u) index arrays for edge endpoints a-b.
    """
    H, W = bits.shape
    full = np.zeros((H, W), dtype=bool)  # full[v, u]: block with TL corner (u, v) fully masked
    if H >= 2 and W >= 2:
        full[: H - 1, : W - 1] = bits[:-1, :-1] & bits[:-1, 1:] & bits[1:, :-1] & bits[1:, 1:]

    edges = []
    # horizontal edges (u,v)-(u+1,v): flanked by blocks (v,u) and (v-1,u)
    hpair = bits[:, :-1] & bits[:, 1:]
    cnt = full[:, : W - 1].astype(np.int8)
    cnt[1:, :] += full[: H - 1, : W - 1]
    hv, hu = np.nonzero(hpair & (cnt < 2))
    edges.append((hv, hu, hv, hu + 1))
    # vertical edges (u,v)-(u,v+1): flanked by blocks (v,u) and (v,u-1)
    vpair = bits[:-1, :] & bits[1:, :]
    cnt = full[: H - 1, :].astype(np.int8)
    cnt[:, 1:] += full[: H - 1, : W - 1]
    vv, vu = np.nonzero(vpair & (cnt < 2))
    edges.append((vv, vu, vv + 1, vu))

    a_v = np.concatenate([e[0] for e in edges])
    a_u = np.concatenate([e[1] for e in edges])
    b_v = np.concatenate([e[2] for e in edges])
    b_u = np.concatenate([e[3] for e in edges])
    return a_v, a_u, b_v, b_u


def build_mask_mesh(
    mask: Mask,
    merged_front: DepthMap,
    d_ori: DepthMap,
    d_edit: DepthMap,
    camera: Camera,
    epsilon: float = DEFAULT_EPSILON,
) -> MaskMesh:
    """Construct the frontal/back/side mask mesh in world space.

    ``merged_front`` is the output of :func:`merge_mask_depth` (epsilon
    already subtracted).  The back surface sits at the uniform maximum of the
    masked depths in both maps, plus epsilon, mirroring the frontal grid.
    """
    bits = mask.bits
    if not bits.any():
        raise EmptyMaskError("mask selects no pixels")
    if not (bits.shape == merged_front.shape == d_ori.shape == d_edit.shape):
        raise DimensionError("mask/depth raster sizes differ")
    if (camera.height, camera.width) != bits.shape:
        raise DimensionError("camera raster does not match mask")

    missing = bits & ~merged_front.validity
    if missing.any():
        v, u = np.argwhere(missing)[0]
        raise IncompleteDepthError(u, v, "merged frontal depth missing inside mask")

    vs, us = np.nonzero(bits)
    n = vs.size
    index = np.full(bits.shape, -1, dtype=np.int64)
    index[vs, us] = np.arange(n)

    dirs = camera.pixel_directions(us, vs)
    origin = camera.center
    front_depth = merged_front.values[vs, us]
    front_verts = origin + dirs * front_depth[:, None]

    masked_vals = np.concatenate(
        [d_ori.values[bits & d_ori.validity], d_edit.values[bits & d_edit.validity]]
    )
    if masked_vals.size == 0:
        raise IncompleteDepthError(us[0], vs[0], "no valid depth inside mask for back surface")
    back_depth = float(masked_vals.max()) + epsilon
    back_verts = origin + dirs * back_depth

    vertices = np.concatenate([front_verts, back_verts], axis=0)

    tris = []
    tags = []
    H, W = bits.shape
    if H >= 2 and W >= 2:
        fullblk = bits[:-1, :-1] & bits[:-1, 1:] & bits[1:, :-1] & bits[1:, 1:]
        bv, bu = np.nonzero(fullblk)
        tl = index[bv, bu]
        tr = index[bv, bu + 1]
        bl = index[bv + 1, bu]
        br = index[bv + 1, bu + 1]
        grid = np.concatenate(
            [
                np.stack([tl, tr, br], axis=1),
                np.stack([tl, br, bl], axis=1),
            ]
        )
        tris.append(grid)
        tags.append(np.full(grid.shape[0], FRONTAL, dtype=np.uint8))
        tris.append(grid + n)
        tags.append(np.full(grid.shape[0], BACK, dtype=np.uint8))

    a_v, a_u, b_v, b_u = grid_boundary_edges(bits)
    if a_v.size:
        fa = index[a_v, a_u]
        fb = index[b_v, b_u]
        side = np.concatenate(
            [
                np.stack([fa, fb, fb + n], axis=1),
                np.stack([fa, fb + n, fa + n], axis=1),
            ]
        )
        tris.append(side)
        tags.append(np.full(side.shape[0], SIDE, dtype=np.uint8))

    if tris:
        triangles = np.concatenate(tris)
        surface_tags = np.concatenate(tags)
        # drop zero-area triangles (e.g. side walls collapsing at epsilon 0)
        a = vertices[triangles[:, 0]]
        b = vertices[triangles[:, 1]]
        c = vertices[triangles[:, 2]]
        area = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
        keep = area >= _MIN_AREA
        triangles = triangles[keep]
        surface_tags = surface_tags[keep]
    else:
        triangles = np.zeros((0, 3), dtype=np.int64)
        surface_tags = np.zeros((0,), dtype=np.uint8)

    return MaskMesh(vertices, triangles, surface_tags)


def _raster_triangle(out: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Mark pixels whose center lies inside (inclusive) the 2D triangle."""
    H, W = out.shape
    # centers at i + 0.5: tight bounds keep edge-on slivers off neighbors
    x0 = max(int(np.ceil(xs.min() - 0.5)), 0)
    x1 = min(int(np.floor(xs.max() - 0.5)), W - 1)
    y0 = max(int(np.ceil(ys.min() - 0.5)), 0)
    y1 = min(int(np.floor(ys.max() - 0.5)), H - 1)
    if x1 < x0 or y1 < y0:
        return
    px = np.arange(x0, x1 + 1) + 0.5
    py = (np.arange(y0, y1 + 1) + 0.5)[:, None]
    e0 = (xs[1] - xs[0]) * (py - ys[0]) - (ys[1] - ys[0]) * (px - xs[0])
    e1 = (xs[2] - xs[1]) * (py - ys[1]) - (ys[2] - ys[1]) * (px - xs[1])
    e2 = (xs[0] - xs[2]) * (py - ys[2]) - (ys[0] - ys[2]) * (px - xs[2])
    inside = ((e0 >= 0) & (e1 >= 0) & (e2 >= 0)) | ((e0 <= 0) & (e1 <= 0) & (e2 <= 0))
    out[y0 : y1 + 1, x0 : x1 + 1] |= inside


_BATCH_WIN = 8  # triangles whose bbox fits an 8x8 window take the batch path


def _raster_triangles_batch(out: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Vectorized inclusive rasterization of many small triangles.

    ``xs``/``ys`` are (T, 3) projected vertices; triangles whose pixel bbox
    exceeds the fixed window fall back to the per-triangle path.  Semantics
    are identical to :func:`_raster_triangle`.
    """
    if xs.shape[0] == 0:
        return
    H, W = out.shape
    x0 = np.ceil(xs.min(axis=1) - 0.5).astype(np.int64)
    x1 = np.floor(xs.max(axis=1) - 0.5).astype(np.int64)
    y0 = np.ceil(ys.min(axis=1) - 0.5).astype(np.int64)
    y1 = np.floor(ys.max(axis=1) - 0.5).astype(np.int64)
    wid = x1 - x0 + 1
    hei = y1 - y0 + 1
    nonempty = (wid > 0) & (hei > 0) & (x1 >= 0) & (y1 >= 0) & (x0 < W) & (y0 < H)
    small = nonempty & (wid <= _BATCH_WIN) & (hei <= _BATCH_WIN)

    for t in np.nonzero(nonempty & ~small)[0]:
        _raster_triangle(out, xs[t], ys[t])

    idx = np.nonzero(small)[0]
    if idx.size == 0:
        return
    span = np.arange(_BATCH_WIN)
    gx = x0[idx, None, None] + span[None, None, :]  # (T, 1->win, win)
    gy = y0[idx, None, None] + span[None, :, None]
    px = gx + 0.5
    py = gy + 0.5
    xa, xb, xc = (xs[idx, k][:, None, None] for k in range(3))
    ya, yb, yc = (ys[idx, k][:, None, None] for k in range(3))
    e0 = (xb - xa) * (py - ya) - (yb - ya) * (px - xa)
    e1 = (xc - xb) * (py - yb) - (yc - yb) * (px - xb)
    e2 = (xa - xc) * (py - yc) - (ya - yc) * (px - xc)
    inside = ((e0 >= 0) & (e1 >= 0) & (e2 >= 0)) | ((e0 <= 0) & (e1 <= 0) & (e2 <= 0))
    inside &= (gx <= x1[idx, None, None]) & (gy <= y1[idx, None, None])
    inside &= (gx >= 0) & (gx < W) & (gy >= 0) & (gy < H)
    lin = gy * W + gx
    out.reshape(-1)[lin[inside]] = True


def _clip_near(poly_cam: np.ndarray, z_near: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a camera-space polygon against z >= z_near."""
    out = []
    k = poly_cam.shape[0]
    for i in range(k):
        a = poly_cam[i]
        b = poly_cam[(i + 1) % k]
        a_in = a[2] >= z_near
        b_in = b[2] >= z_near
        if a_in:
            out.append(a)
        if a_in != b_in:
            s = (z_near - a[2]) / (b[2] - a[2])
            out.append(a + s * (b - a))
    return np.asarray(out).reshape(-1, 3)


def render_mask(mesh: MaskMesh, camera: Camera) -> Mask:
    """Binary coverage rasterization of all mesh surfaces.

    A pixel is set when its center falls inside any projected triangle
    (inclusive edge rule) or when any mesh vertex projects into it; the vertex
    rule keeps degenerate meshes (single-pixel masks) renderable and
    guarantees frame-1 containment.  No z-test: output is a binary union.
    """
    H, W = camera.height, camera.width
    out = np.zeros((H, W), dtype=bool)
    if mesh.vertices.shape[0] == 0:
        return Mask(out)

    p_cam = mesh.vertices @ camera.rotation.T + camera.translation

    # vertex splats
    z = p_cam[:, 2]
    fronts = z > Z_NEAR
    if fronts.any():
        with np.errstate(divide="ignore", invalid="ignore"):
            u = camera.fx * p_cam[fronts, 0] / z[fronts] + camera.cx
            v = camera.fy * p_cam[fronts, 1] / z[fronts] + camera.cy
        ui = np.floor(u).astype(np.int64)
        vi = np.floor(v).astype(np.int64)
        inb = (ui >= 0) & (ui < W) & (vi >= 0) & (vi < H)
        out[vi[inb], ui[inb]] = True

    if mesh.triangles.shape[0]:
        tri_z = z[mesh.triangles]
        unclipped = (tri_z >= _CLIP_Z).all(axis=1)
        if unclipped.any():
            tris = mesh.triangles[unclipped]
            with np.errstate(divide="ignore", invalid="ignore"):
                pu = camera.fx * p_cam[:, 0] / z + camera.cx
                pv = camera.fy * p_cam[:, 1] / z + camera.cy
            _raster_triangles_batch(out, pu[tris], pv[tris])
        # triangles straddling the near plane are clipped one by one
        for tri in mesh.triangles[~unclipped]:
            corners = p_cam[tri]
            if np.all(corners[:, 2] < _CLIP_Z):
                continue
            corners = _clip_near(corners, _CLIP_Z)
            if corners.shape[0] < 3:
                continue
            xs = camera.fx * corners[:, 0] / corners[:, 2] + camera.cx
            ys = camera.fy * corners[:, 1] / corners[:, 2] + camera.cy
            for i in range(1, corners.shape[0] - 1):  # fan over the clipped polygon
                _raster_triangle(out, xs[[0, i, i + 1]], ys[[0, i, i + 1]])
    return Mask(out)


def propagate_masks(mesh: MaskMesh, cameras: list[Camera]) -> list[Mask]:
    """Render the mask mesh under every camera, order preserved."""
    if not cameras:
        raise ValidationError("propagate_masks needs at least one camera")
    return [render_mask(mesh, cam) for cam in cameras]


def save_obj(mesh: MaskMesh, path):
    """ASCII OBJ export grouped by surface, as a debugging aid."""
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
    for tag in (FRONTAL, BACK, SIDE):
        sel = mesh.surface_tags == tag
        if not sel.any():
            continue
        lines.append(f"g {SURFACE_NAMES[tag]}")
        for tri in mesh.triangles[sel]:
            lines.append(f"f {tri[0] + 1} {tri[1] + 1} {tri[2] + 1}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
