"""Synthetic scenes with analytic geometry for testing the whole pipeline.

Scenes are built from textured axis-aligned planes and boxes observed along
simple camera trajectories.  Because rays are parameterized at unit camera-z,
the ray parameter at a hit *is* the z-depth, so rendered depth maps are exact.
Edited variants (box insertion / primitive deletion) provide the ground truth
that mask propagation and guidance rendering are scored against.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SceneSpecError
from .geometry import Camera, DepthMap, Image, Mask, Z_NEAR

_AXES = {"x": 0, "y": 1, "z": 2}
# in-plane axes for each normal axis, in (first, second) order
_PLANE_UV = {0: (1, 2), 1: (0, 2), 2: (0, 1)}


@dataclass(frozen=True)
class Checker:
    period: float = 1.0
    phase: float = 0.0
    color_a: tuple = (0.85, 0.85, 0.85)
    color_b: tuple = (0.25, 0.25, 0.25)

    def colors(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        pa = np.floor((a - self.phase) / self.period).astype(np.int64)
        pb = np.floor((b - self.phase) / self.period).astype(np.int64)
        parity = ((pa + pb) & 1).astype(bool)
        out = np.where(parity[..., None], np.asarray(self.color_b), np.asarray(self.color_a))
        return out

    def to_dict(self):
        return {
            "period": self.period,
            "phase": self.phase,
            "color_a": list(self.color_a),
            "color_b": list(self.color_b),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            float(d.get("period", 1.0)),
            float(d.get("phase", 0.0)),
            tuple(d.get("color_a", (0.85, 0.85, 0.85))),
            tuple(d.get("color_b", (0.25, 0.25, 0.25))),
        )


@dataclass(frozen=True)
class Plane:
    """Finite axis-aligned rectangle; ``axis`` is the normal direction."""

    axis: int
    offset: float
    center: tuple  # (2,) along the in-plane axes
    half_extent: tuple  # (2,) > 0
    checker: Checker = field(default_factory=Checker)

    def __post_init__(self):
        if self.axis not in (0, 1, 2):
            raise SceneSpecError(f"plane axis must be 0..2, got {self.axis}")
        if not all(h > 0 for h in self.half_extent):
            raise SceneSpecError("plane half_extent must be positive")

    def intersect(self, origin: np.ndarray, dirs: np.ndarray):
        """Ray parameters (z-depth) and colors; misses hold +inf."""
        i, j = _PLANE_UV[self.axis]
        dk = dirs[..., self.axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (self.offset - origin[self.axis]) / dk
        a = origin[i] + s * dirs[..., i]
        b = origin[j] + s * dirs[..., j]
        hit = (
            np.isfinite(s)
            & (s > Z_NEAR)
            & (np.abs(a - self.center[0]) <= self.half_extent[0])
            & (np.abs(b - self.center[1]) <= self.half_extent[1])
        )
        s = np.where(hit, s, np.inf)
        a_safe = np.where(np.isfinite(a), a, 0.0)
        b_safe = np.where(np.isfinite(b), b, 0.0)
        color = self.checker.colors(a_safe, b_safe)
        return s, color

    def to_dict(self):
        return {
            "kind": "plane",
            "axis": "xyz"[self.axis],
            "offset": self.offset,
            "center": list(self.center),
            "half_extent": list(self.half_extent),
            "checker": self.checker.to_dict(),
        }


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by center and full size."""

    center: tuple
    size: tuple
    checker: Checker = field(default_factory=Checker)

    def __post_init__(self):
        if not all(s > 0 for s in self.size):
            raise SceneSpecError("box size must be positive")

    def bounds(self):
        c = np.asarray(self.center, dtype=np.float64)
        h = np.asarray(self.size, dtype=np.float64) / 2.0
        return c - h, c + h

    def intersect(self, origin: np.ndarray, dirs: np.ndarray):
        lo, hi = self.bounds()
        with np.errstate(divide="ignore", invalid="ignore"):
            t_lo = (lo - origin) / dirs
            t_hi = (hi - origin) / dirs
        t1 = np.fmin(t_lo, t_hi)
        t2 = np.fmax(t_lo, t_hi)
        # rays parallel to a slab: inside -> (-inf, inf), outside -> empty
        par = dirs == 0.0
        if par.any():
            inside = (origin >= lo) & (origin <= hi)
            t1 = np.where(par & inside, -np.inf, t1)
            t2 = np.where(par & inside, np.inf, t2)
            t1 = np.where(par & ~inside, np.inf, t1)
            t2 = np.where(par & ~inside, -np.inf, t2)
        near_ax = np.argmax(t1, axis=-1)
        t_near = np.take_along_axis(t1, near_ax[..., None], axis=-1)[..., 0]
        t_far = t2.min(axis=-1)
        hit = (t_near <= t_far) & (t_near > Z_NEAR)
        s = np.where(hit, t_near, np.inf)

        s_pt = np.where(np.isfinite(s), s, 1.0)
        point = origin + s_pt[..., None] * dirs
        color = np.zeros(s.shape + (3,))
        for ax in (0, 1, 2):
            i, j = _PLANE_UV[ax]
            face = near_ax == ax
            if face.any():
                col = self.checker.colors(point[..., i], point[..., j])
                color = np.where(face[..., None], col, color)
        return s, color

    def to_dict(self):
        return {
            "kind": "box",
            "center": list(self.center),
            "size": list(self.size),
            "checker": self.checker.to_dict(),
        }


@dataclass(frozen=True)
class Trajectory:
    """Camera path: static | orbit | dolly | truck.

    Frame 0 always uses ``eye`` looking at ``target``.  Orbits rotate the eye
    about the vertical axis through the target by ``step_deg`` per frame and
    re-aim at the target; dolly translates along the initial forward axis by
    ``step`` per frame with fixed orientation; truck translates sideways.
    """

    kind: str
    frames: int
    eye: tuple
    target: tuple
    step_deg: float = 0.0
    step: float = 0.0

    def __post_init__(self):
        if self.kind not in ("static", "orbit", "dolly", "truck"):
            raise SceneSpecError(f"unknown trajectory kind {self.kind!r}")
        if self.frames < 1:
            raise SceneSpecError("trajectory needs frames >= 1")

    def to_dict(self):
        return {
            "kind": self.kind,
            "frames": self.frames,
            "eye": list(self.eye),
            "target": list(self.target),
            "step_deg": self.step_deg,
            "step": self.step,
        }


def look_at(eye, target) -> np.ndarray:
    """World-to-camera rotation for +z forward / +y down, aimed eye->target."""
    eye = np.asarray(eye, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - eye
    n = np.linalg.norm(fwd)
    if n < 1e-12:
        raise SceneSpecError("camera eye and target coincide")
    z = fwd / n
    down = np.array([0.0, 1.0, 0.0])
    x = np.cross(down, z)
    nx = np.linalg.norm(x)
    if nx < 1e-9:  # looking straight up/down: fall back to world x
        x = np.array([1.0, 0.0, 0.0])
        x = x - z * np.dot(x, z)
        nx = np.linalg.norm(x)
    x = x / nx
    y = np.cross(z, x)
    return np.stack([x, y, z])


def _camera_at(eye, R, intr, frame_index) -> Camera:
    eye = np.asarray(eye, dtype=np.float64)
    t = -R @ eye
    return Camera(
        fx=intr["fx"],
        fy=intr["fy"],
        cx=intr["cx"],
        cy=intr["cy"],
        rotation=R,
        translation=t,
        width=intr["width"],
        height=intr["height"],
        frame_index=frame_index,
    )


@dataclass(frozen=True)
class SceneSpec:
    primitives: tuple
    trajectory: Trajectory
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    edit: dict | None = None  # {"kind": "insert_box", "box": Box} | {"kind": "delete_primitive", "index": int}

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise SceneSpecError("raster size must be positive")
        if not self.primitives:
            raise SceneSpecError("scene needs at least one primitive")
        if self.edit is not None:
            kind = self.edit.get("kind")
            if kind == "insert_box":
                if not isinstance(self.edit.get("box"), Box):
                    raise SceneSpecError("insert_box edit needs a box")
            elif kind == "delete_primitive":
                idx = self.edit.get("index", -1)
                if not (0 <= idx < len(self.primitives)):
                    raise SceneSpecError(f"delete_primitive index {idx} out of range")
            else:
                raise SceneSpecError(f"unknown edit kind {kind!r}")
        for cam in self.cameras():
            eye = cam.center
            for prim in self._edited_primitives() + list(self.primitives):
                if isinstance(prim, Box):
                    lo, hi = prim.bounds()
                    if np.all(eye >= lo) & np.all(eye <= hi):
                        raise SceneSpecError("trajectory places a camera inside a solid")

    def _intr(self):
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }

    def cameras(self) -> list[Camera]:
        tr = self.trajectory
        intr = self._intr()
        eye0 = np.asarray(tr.eye, dtype=np.float64)
        target = np.asarray(tr.target, dtype=np.float64)
        R0 = look_at(eye0, target)
        cams = []
        for i in range(tr.frames):
            if tr.kind == "static":
                cams.append(_camera_at(eye0, R0, intr, i))
            elif tr.kind == "orbit":
                th = math.radians(tr.step_deg * i)
                c, s = math.cos(th), math.sin(th)
                rot_y = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
                eye = target + rot_y @ (eye0 - target)
                cams.append(_camera_at(eye, look_at(eye, target), intr, i))
            elif tr.kind == "dolly":
                fwd = R0[2]
                eye = eye0 + tr.step * i * fwd
                cams.append(_camera_at(eye, R0, intr, i))
            else:  # truck
                right = R0[0]
                eye = eye0 + tr.step * i * right
                cams.append(_camera_at(eye, R0, intr, i))
        return cams

    def _edited_primitives(self) -> list:
        if self.edit is None:
            return list(self.primitives)
        if self.edit["kind"] == "insert_box":
            return list(self.primitives) + [self.edit["box"]]
        return [p for k, p in enumerate(self.primitives) if k != self.edit["index"]]

    def edit_solid(self):
        if self.edit is None:
            raise SceneSpecError("scene spec has no edit")
        if self.edit["kind"] == "insert_box":
            return self.edit["box"]
        return self.primitives[self.edit["index"]]

    def to_dict(self) -> dict:
        d = {
            "width": self.width,
            "height": self.height,
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "primitives": [p.to_dict() for p in self.primitives],
            "trajectory": self.trajectory.to_dict(),
        }
        if self.edit is not None:
            if self.edit["kind"] == "insert_box":
                d["edit"] = {"kind": "insert_box", "box": self.edit["box"].to_dict()}
            else:
                d["edit"] = {"kind": "delete_primitive", "index": self.edit["index"]}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        prims = []
        for p in d.get("primitives", []):
            if p.get("kind") == "plane":
                prims.append(
                    Plane(
                        axis=_AXES[p["axis"]] if isinstance(p["axis"], str) else int(p["axis"]),
                        offset=float(p["offset"]),
                        center=tuple(p["center"]),
                        half_extent=tuple(p["half_extent"]),
                        checker=Checker.from_dict(p.get("checker", {})),
                    )
                )
            elif p.get("kind") == "box":
                prims.append(
                    Box(
                        center=tuple(p["center"]),
                        size=tuple(p["size"]),
                        checker=Checker.from_dict(p.get("checker", {})),
                    )
                )
            else:
                raise SceneSpecError(f"unknown primitive kind {p.get('kind')!r}")
        tr = d.get("trajectory")
        if tr is None:
            raise SceneSpecError("scene spec needs a trajectory")
        trajectory = Trajectory(
            kind=tr["kind"],
            frames=int(tr["frames"]),
            eye=tuple(tr["eye"]),
            target=tuple(tr["target"]),
            step_deg=float(tr.get("step_deg", 0.0)),
            step=float(tr.get("step", 0.0)),
        )
        edit = None
        e = d.get("edit")
        if e is not None:
            if e.get("kind") == "insert_box":
                b = e["box"]
                edit = {
                    "kind": "insert_box",
                    "box": Box(tuple(b["center"]), tuple(b["size"]), Checker.from_dict(b.get("checker", {}))),
                }
            elif e.get("kind") == "delete_primitive":
                edit = {"kind": "delete_primitive", "index": int(e["index"])}
            else:
                raise SceneSpecError(f"unknown edit kind {e.get('kind')!r}")
        return cls(
            primitives=tuple(prims),
            trajectory=trajectory,
            width=int(d["width"]),
            height=int(d["height"]),
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            edit=edit,
        )

    @classmethod
    def from_json(cls, text: str) -> "SceneSpec":
        return cls.from_dict(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def trace(primitives, camera: Camera):
    """Nearest analytic intersection per pixel: (DepthMap, Image)."""
    dirs = camera.direction_grid()
    origin = camera.center
    best = np.full((camera.height, camera.width), np.inf)
    color = np.zeros((camera.height, camera.width, 3))
    for prim in primitives:
        s, col = prim.intersect(origin, dirs)
        closer = s < best
        best = np.where(closer, s, best)
        color = np.where(closer[..., None], col, color)
    valid = np.isfinite(best)
    depth = DepthMap(np.where(valid, best, np.nan), valid)
    return depth, Image(np.clip(color, 0.0, 1.0))


@dataclass(frozen=True)
class GroundTruth:
    frames: list
    depths: list
    cameras: list


def render_ground_truth(spec: SceneSpec) -> GroundTruth:
    """Analytic frames + depths of the unedited scene for every camera."""
    cams = spec.cameras()
    frames, depths = [], []
    for cam in cams:
        d, img = trace(spec.primitives, cam)
        frames.append(img)
        depths.append(d)
    return GroundTruth(frames, depths, cams)


def render_edited_ground_truth(spec: SceneSpec) -> GroundTruth:
    """Analytic frames + depths of the edited scene (edit applied)."""
    if spec.edit is None:
        raise SceneSpecError("scene spec has no edit")
    cams = spec.cameras()
    prims = spec._edited_primitives()
    frames, depths = [], []
    for cam in cams:
        d, img = trace(prims, cam)
        frames.append(img)
        depths.append(d)
    return GroundTruth(frames, depths, cams)


def ground_truth_masks(spec: SceneSpec) -> list[Mask]:
    """Exact silhouette of the edit solid per frame, ignoring occluders."""
    solid = spec.edit_solid()
    masks = []
    for cam in spec.cameras():
        s, _ = solid.intersect(cam.center, cam.direction_grid())
        masks.append(Mask(np.isfinite(s)))
    return masks


# ---------------------------------------------------------------------------
# preset scenes shared by tests, demos and the CLI examples

def _room_primitives(backdrop_z: float):
    return (
        Plane(axis=2, offset=backdrop_z, center=(0.0, 0.0), half_extent=(12.0, 9.0),
              checker=Checker(0.8, 0.0, (0.85, 0.8, 0.3), (0.2, 0.25, 0.6))),
        Plane(axis=1, offset=1.6, center=(0.0, 4.5), half_extent=(12.0, 4.5),
              checker=Checker(1.0, 0.1, (0.4, 0.7, 0.4), (0.6, 0.3, 0.2))),
    )


def insertion_scene(trajectory: str = "orbit", frames: int = 16) -> SceneSpec:
    """Shallow box inserted flush against the backdrop; head-on editing view.

    Tuned so the propagated mask tracks the analytic box silhouette tightly
    under both an orbit and a dolly.
    """
    box = Box((0.0, 0.1, 5.075), (1.4, 1.4, 0.15),
              Checker(0.35, 0.05, (0.9, 0.2, 0.2), (0.95, 0.85, 0.2)))
    steps = {"orbit": (1.25, 0.0), "dolly": (0.0, -0.15), "truck": (0.0, 0.06), "static": (0.0, 0.0)}
    step_deg, step = steps[trajectory]
    return SceneSpec(
        primitives=_room_primitives(backdrop_z=5.15),
        trajectory=Trajectory(kind=trajectory, frames=frames, eye=(0.0, 0.0, 0.0),
                              target=(0.0, 0.1, 5.075), step_deg=step_deg, step=step),
        width=128, height=96, fx=160.0, fy=160.0, cx=64.0, cy=48.0,
        edit={"kind": "insert_box", "box": box},
    )


def deep_box_scene(frames: int = 16, step_deg: float = 2.0) -> SceneSpec:
    """Deep box seen off-axis, so the masked region spans a real depth range.

    Used by the depth-distortion robustness protocol, where perturbations are
    fractions of that range.
    """
    box = Box((0.0, 0.1, 5.5), (1.4, 1.4, 1.4),
              Checker(0.35, 0.05, (0.9, 0.2, 0.2), (0.95, 0.85, 0.2)))
    return SceneSpec(
        primitives=_room_primitives(backdrop_z=6.5),
        trajectory=Trajectory(kind="orbit", frames=frames, eye=(2.2, -0.4, 0.0),
                              target=(0.0, 0.1, 5.5), step_deg=step_deg),
        width=128, height=96, fx=160.0, fy=160.0, cx=64.0, cy=48.0,
        edit={"kind": "insert_box", "box": box},
    )


def deletion_scene(frames: int = 8, step_deg: float = 1.5) -> SceneSpec:
    """Small box present in the original scene; the edit removes it."""
    box = Box((0.4, 0.2, 4.5), (0.9, 0.9, 0.5),
              Checker(0.3, 0.0, (0.2, 0.6, 0.9), (0.9, 0.9, 0.9)))
    return SceneSpec(
        primitives=_room_primitives(backdrop_z=5.5) + (box,),
        trajectory=Trajectory(kind="orbit", frames=frames, eye=(0.0, 0.0, 0.0),
                              target=(0.4, 0.2, 4.5), step_deg=step_deg),
        width=128, height=96, fx=160.0, fy=160.0, cx=64.0, cy=48.0,
        edit={"kind": "delete_primitive", "index": 2},
    )


def session_inputs(spec: SceneSpec, depth_scale: float = 2.0, depth_shift: float = 0.5):
    """Everything a session needs from an edited scene spec, plus the truth.

    The edited depth is disguised behind the affine map (d - shift) / scale to
    stand in for a relative depth estimate the alignment stage must undo.
    Returns (session_kwargs, ground_truth) where ground_truth carries the
    analytic silhouette masks and edited-scene frames.
    """
    if spec.edit is None:
        raise SceneSpecError("scene spec needs an edit")
    gt = render_ground_truth(spec)
    edited = render_edited_ground_truth(spec)
    masks = ground_truth_masks(spec)
    d_true = edited.depths[0]
    raw = DepthMap((d_true.values - depth_shift) / depth_scale, d_true.validity)
    session_kwargs = dict(
        frames=gt.frames,
        cameras=gt.cameras,
        d_ori=gt.depths[0],
        edited_image=edited.frames[0],
        edited_depth_raw=raw,
        mask=masks[0],
    )
    truth = {"masks": masks, "edited_frames": edited.frames, "edited_depths": edited.depths,
             "original": gt}
    return session_kwargs, truth
