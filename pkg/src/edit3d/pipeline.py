"""End-to-end edit session orchestration, condition-pack assembly, metrics.

A session carries the input video, cameras, the frame-1 depth, the edited
frame with its relative depth, and the 2-D edit mask.  Running it aligns and
merges depth, lifts the edited frame to a point cloud, builds the mask mesh,
propagates masks to all frames, renders per-frame guidance, and bundles the
conditioning channels (point render, masked original, edited reference, mask)
into a pack a downstream video generator would consume.
"""

from __future__ import annotations

import warnings
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from . import alignment as _align
from .errors import (
    DimensionError,
    Edit3dError,
    StageError,
    UndefinedMetricError,
    ValidationError,
)
from .geometry import Camera, DepthMap, Image, Mask, PointCloud, backproject
from .maskmesh import MaskMesh, build_mask_mesh, merge_mask_depth, propagate_masks
from .render import RenderedFrame, render_sequence


@contextmanager
def _stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Edit3dError as err:
        raise StageError(name, err) from err


@dataclass(frozen=True)
class EditSession:
    frames: list  # Image, I^1..I^N
    cameras: list  # Camera, frame 0 is the editing view
    d_ori: DepthMap  # frame-1 scene depth
    edited_image: Image
    edited_depth_raw: DepthMap  # relative depth, pre-normalization
    mask: Mask  # true = edited
    alignment_override: tuple | None = None  # (scale, shift) skips the solve
    epsilon: float = 0.02
    splat_radius: int = 1
    prompt: str = ""  # carried into the manifest verbatim, never interpreted
    seed: int = 0
    erode_radius: int = 0

    def __post_init__(self):
        if len(self.frames) < 1 or len(self.frames) != len(self.cameras):
            raise ValidationError(
                f"need N >= 1 frames with matching cameras, got {len(self.frames)}/{len(self.cameras)}"
            )
        size = (self.frames[0].height, self.frames[0].width)
        rasters = [*self.frames, self.d_ori, self.edited_image, self.edited_depth_raw, self.mask]
        for r in rasters:
            if (r.height, r.width) != size:
                raise DimensionError(f"raster {r.width}x{r.height} does not match session {size[1]}x{size[0]}")
        for cam in self.cameras:
            if (cam.height, cam.width) != size:
                raise DimensionError("camera raster size does not match session")

    @property
    def frame_count(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class SessionArtifacts:
    """Intermediate products of a session run, useful for previews/eval."""

    normalized_depth: DepthMap
    alignment: _align.Alignment
    d_edit: DepthMap
    cloud: PointCloud
    merged_front: DepthMap
    mesh: MaskMesh
    masks: list  # Mask per frame
    renders: list  # RenderedFrame per frame


@dataclass(frozen=True)
class ConditionPack:
    frames: list  # original frames, carried for evaluation
    masks: list
    point_renders: list  # RenderedFrame
    masked_originals: list  # Image, zero inside the propagated mask
    edited_ref: Image
    manifest: dict


def compute_alignment(session: EditSession):
    """Normalize the edited depth and solve or accept (s, t)."""
    with _stage("normalize-depth"):
        normalized = _align.normalize_depth(session.edited_depth_raw)
    unedited = session.mask.complement()
    with _stage("solve-alignment"):
        if session.alignment_override is not None:
            s, t = session.alignment_override
            align = _align.manual_alignment(
                normalized, session.d_ori, unedited, s, t, session.erode_radius
            )
        else:
            align = _align.solve_alignment(normalized, session.d_ori, unedited, session.erode_radius)
    return normalized, align


def run_stages(session: EditSession) -> SessionArtifacts:
    """Execute the geometric pipeline and keep every intermediate."""
    normalized, align = compute_alignment(session)
    with _stage("merge-depth"):
        d_edit = _align.merge_depth(session.d_ori, normalized, align, session.mask)
    cam0 = session.cameras[0]
    with _stage("backproject"):
        cloud = backproject(d_edit, session.edited_image, cam0)
    with _stage("merge-mask-depth"):
        merged_front = merge_mask_depth(session.d_ori, d_edit, session.mask, session.epsilon)
    with _stage("build-mask-mesh"):
        mesh = build_mask_mesh(session.mask, merged_front, session.d_ori, d_edit, cam0, session.epsilon)
    with _stage("propagate-masks"):
        masks = propagate_masks(mesh, session.cameras)
    with _stage("render-sequence"):
        renders = render_sequence(cloud, session.cameras, session.splat_radius)
    return SessionArtifacts(normalized, align, d_edit, cloud, merged_front, mesh, masks, renders)


def rerun_with_depth(session: EditSession, d_edit: DepthMap) -> SessionArtifacts:
    """Re-run every stage downstream of depth merging with a given D_edit.

    Used by the depth-distortion robustness protocol, which perturbs the
    merged absolute depth inside the mask and replays the pipeline.
    """
    normalized, align = compute_alignment(session)
    cam0 = session.cameras[0]
    with _stage("backproject"):
        cloud = backproject(d_edit, session.edited_image, cam0)
    with _stage("merge-mask-depth"):
        merged_front = merge_mask_depth(session.d_ori, d_edit, session.mask, session.epsilon)
    with _stage("build-mask-mesh"):
        mesh = build_mask_mesh(session.mask, merged_front, session.d_ori, d_edit, cam0, session.epsilon)
    with _stage("propagate-masks"):
        masks = propagate_masks(mesh, session.cameras)
    with _stage("render-sequence"):
        renders = render_sequence(cloud, session.cameras, session.splat_radius)
    return SessionArtifacts(normalized, align, d_edit, cloud, merged_front, mesh, masks, renders)


def mask_original(frame: Image, mask: Mask) -> Image:
    """Original frame with the propagated mask region zeroed out."""
    return Image(np.where(mask.bits[..., None], 0.0, frame.values))


def assemble_pack(session: EditSession, artifacts: SessionArtifacts) -> ConditionPack:
    with _stage("assemble-pack"):
        masked = [mask_original(f, m) for f, m in zip(session.frames, artifacts.masks)]
        manifest = {
            "frames": session.frame_count,
            "width": session.frames[0].width,
            "height": session.frames[0].height,
            "alignment": artifacts.alignment.to_dict(),
            "epsilon": session.epsilon,
            "splat_radius": session.splat_radius,
            "seed": session.seed,
            "prompt": session.prompt,
            "channel_order": ["point_render", "masked_original", "edited_ref"],
        }
        return ConditionPack(
            frames=list(session.frames),
            masks=list(artifacts.masks),
            point_renders=list(artifacts.renders),
            masked_originals=masked,
            edited_ref=session.edited_image,
            manifest=manifest,
        )


def run_session(session: EditSession) -> ConditionPack:
    """The full pipeline: stages plus pack assembly; deterministic."""
    return assemble_pack(session, run_stages(session))


# ---------------------------------------------------------------------------
# metrics

def masked_psnr(generated: list, reference: list, masks: list) -> float:
    """PSNR over the mask-false pixels pooled across all frames (MAX = 1).

    Identical inputs return ``inf``; an empty evaluation domain is an error.
    """
    if not (len(generated) == len(reference) == len(masks)):
        raise DimensionError("sequence lengths differ")
    total_se = 0.0
    total_n = 0
    for gen, ref, m in zip(generated, reference, masks):
        if gen.shape != ref.shape or gen.shape != m.shape:
            raise DimensionError("frame/mask sizes differ")
        keep = ~m.bits
        diff = gen.values[keep] - ref.values[keep]
        total_se += float((diff * diff).sum())
        total_n += diff.size
    if total_n == 0:
        raise UndefinedMetricError("no unedited pixels to evaluate")
    mse = total_se / total_n
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))


def mask_iou(predicted: list, truth: list):
    """Per-frame and mean intersection-over-union; both-empty counts as 1."""
    if len(predicted) != len(truth):
        raise DimensionError("sequence lengths differ")
    per_frame = []
    for p, t in zip(predicted, truth):
        if p.shape != t.shape:
            raise DimensionError("mask sizes differ")
        inter = int((p.bits & t.bits).sum())
        union = int((p.bits | t.bits).sum())
        per_frame.append(1.0 if union == 0 else inter / union)
    mean = float(np.mean(per_frame)) if per_frame else 1.0
    return per_frame, mean


def perturb_depth(d: DepthMap, mask: Mask, mode: str, magnitude: float, seed: int = 0) -> DepthMap:
    """Distort masked depth: uniform noise or a constant shift.

    ``magnitude`` is a fraction of the masked region's depth range; noise is
    uniform in +-magnitude*range, shift adds magnitude*range (signed).  The
    draw is seeded, so results are reproducible bit for bit.
    """
    if mode not in ("noise", "shift"):
        raise ValidationError(f"unknown perturbation mode {mode!r}")
    region = mask.bits & d.validity
    if not region.any():
        warnings.warn("perturb_depth: empty mask, returning input unchanged")
        return d
    vals = d.values[region]
    depth_range = float(vals.max() - vals.min())
    out = np.array(d.values)
    if mode == "shift":
        out[region] = vals + magnitude * depth_range
    else:
        rng = np.random.default_rng(seed)
        # scale of the fixed unit draw keeps realizations nested across magnitudes
        unit = rng.uniform(-1.0, 1.0, size=vals.shape)
        out[region] = vals + abs(magnitude) * depth_range * unit
    return DepthMap(np.where(d.validity, out, np.nan), d.validity)


def robustness_curve(
    session: EditSession,
    reference_frames: list,
    eval_masks: list,
    mode: str,
    magnitudes: list,
    seed: int = 0,
):
    """Masked PSNR of re-rendered guidance for increasing depth distortion.

    For each magnitude the merged edited depth is perturbed inside the edit
    mask, the downstream pipeline re-runs, and the guidance renders are scored
    in the unedited region of ``eval_masks`` against ``reference_frames``.
    Returns a list of (magnitude, psnr_db).
    """
    base = run_stages(session)
    curve = []
    for mag in magnitudes:
        if mag == 0:
            arts = base
        else:
            d_pert = perturb_depth(base.d_edit, session.mask, mode, mag, seed)
            arts = rerun_with_depth(session, d_pert)
        gen = [rf.color for rf in arts.renders]
        curve.append((float(mag), masked_psnr(gen, reference_frames, eval_masks)))
    return curve
