"""edit3d: depth-aligned point-cloud editing and 3D mask propagation.

The package turns a single edited video frame (image + relative depth + 2-D
mask) into per-frame conditioning signals for the rest of the video: aligned
and merged depth, an edited point cloud, propagated masks from a 3-D mask
mesh, and z-buffered guidance renders, bundled into a condition pack.
"""

from .alignment import Alignment, merge_depth, normalize_depth, solve_alignment
from .geometry import Camera, DepthMap, Image, Mask, PointCloud, backproject, pixel_ray, project_depth
from .maskmesh import MaskMesh, build_mask_mesh, merge_mask_depth, propagate_masks, render_mask
from .pipeline import (
    ConditionPack,
    EditSession,
    mask_iou,
    masked_psnr,
    perturb_depth,
    run_session,
)
from .render import RenderedFrame, render_cloud, render_sequence
from .synth import SceneSpec, ground_truth_masks, render_ground_truth

__all__ = [
    "Alignment",
    "Camera",
    "ConditionPack",
    "DepthMap",
    "EditSession",
    "Image",
    "Mask",
    "MaskMesh",
    "PointCloud",
    "RenderedFrame",
    "SceneSpec",
    "backproject",
    "build_mask_mesh",
    "ground_truth_masks",
    "mask_iou",
    "masked_psnr",
    "merge_depth",
    "merge_mask_depth",
    "normalize_depth",
    "perturb_depth",
    "pixel_ray",
    "project_depth",
    "propagate_masks",
    "render_cloud",
    "render_ground_truth",
    "render_mask",
    "render_sequence",
    "run_session",
    "solve_alignment",
]

__version__ = "0.1.0"
