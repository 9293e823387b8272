"""Scale/shift alignment of relative depth against scene depth.

The edited frame's depth arrives in relative units; over unedited pixels it
corresponds 1:1 with the original scene depth, so the affine map d -> s*d + t
minimizing the summed squared pixel distance is solved in closed form and the
two maps are merged per-pixel under the edit mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateAlignmentError,
    DegenerateInputError,
    DimensionError,
    IncompleteDepthError,
    InsufficientOverlapError,
    ValidationError,
)
from .geometry import DepthMap, Mask

# Below this fraction of the squared depth range the variance no longer pins
# a meaningful scale.
VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class Alignment:
    scale: float
    shift: float
    residual_rmse: float
    pixel_count: int

    def __post_init__(self):
        if self.pixel_count < 2:
            raise ValidationError("alignment needs at least two pixels")
        if not (np.isfinite(self.scale) and self.scale != 0.0):
            raise ValidationError(f"alignment scale must be finite and nonzero, got {self.scale}")
        if not (np.isfinite(self.shift) and self.residual_rmse >= 0.0):
            raise ValidationError("alignment shift/residual out of range")

    def to_dict(self) -> dict:
        return {
            "scale": float(self.scale),
            "shift": float(self.shift),
            "residual_rmse": float(self.residual_rmse),
            "pixel_count": int(self.pixel_count),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Alignment":
        return cls(
            float(d["scale"]),
            float(d["shift"]),
            float(d["residual_rmse"]),
            int(d["pixel_count"]),
        )


def normalize_depth(raw: DepthMap) -> DepthMap:
    """Min-max map of the valid values onto [0, 1]; validity is preserved."""
    vals = raw.values[raw.validity]
    if vals.size < 2:
        raise DegenerateInputError(f"need >= 2 valid depth values, got {vals.size}")
    lo, hi = float(vals.min()), float(vals.max())
    if hi <= lo:
        raise DegenerateInputError("depth map is constant; cannot normalize")
    out = (raw.values - lo) / (hi - lo)
    return DepthMap(np.where(raw.validity, out, np.nan), raw.validity)


def erode_mask(mask: Mask, radius: int) -> Mask:
    """4-neighborhood erosion, applied ``radius`` times."""
    bits = mask.bits
    for _ in range(int(radius)):
        inner = bits.copy()
        inner[1:, :] &= bits[:-1, :]
        inner[:-1, :] &= bits[1:, :]
        inner[:, 1:] &= bits[:, :-1]
        inner[:, :-1] &= bits[:, 1:]
        inner[0, :] = inner[-1, :] = False
        inner[:, 0] = inner[:, -1] = False
        bits = inner
    return Mask(bits)


def _overlap(d_hat: DepthMap, d_ori: DepthMap, unedited: Mask, erode_radius: int):
    if not (d_hat.shape == d_ori.shape == unedited.shape):
        raise DimensionError(
            f"shapes differ: d_hat {d_hat.shape}, d_ori {d_ori.shape}, mask {unedited.shape}"
        )
    region = unedited if erode_radius == 0 else erode_mask(unedited, erode_radius)
    use = region.bits & d_hat.validity & d_ori.validity
    return d_hat.values[use], d_ori.values[use]


def solve_alignment(
    d_hat: DepthMap,
    d_ori: DepthMap,
    unedited: Mask,
    erode_radius: int = 0,
) -> Alignment:
    """Closed-form least-squares (s, t) over the valid unedited overlap.

    Minimizes sum_i ((s * d_hat_i + t) - d_ori_i)^2; the unique minimizer is
    s = cov(d_hat, d) / var(d_hat), t = mean(d) - s * mean(d_hat).  Sums use
    numpy's pairwise reduction in float64, so results are bit-stable.
    """
    dh, d = _overlap(d_hat, d_ori, unedited, erode_radius)
    m = dh.size
    if m < 2:
        raise InsufficientOverlapError(f"need >= 2 overlapping pixels, got {m}")
    mean_dh = dh.sum() / m
    mean_d = d.sum() / m
    ch = dh - mean_dh
    var = (ch * ch).sum() / m
    rng = float(dh.max() - dh.min())
    if var <= VARIANCE_FLOOR * rng * rng or rng == 0.0:
        raise DegenerateAlignmentError(
            f"depth variance {var:.3e} too small over {m} pixels; supply manual scale/shift"
        )
    cov = (ch * (d - mean_d)).sum() / m
    s = cov / var
    t = mean_d - s * mean_dh
    r = s * dh + t - d
    rmse = float(np.sqrt((r * r).sum() / m))
    return Alignment(float(s), float(t), rmse, int(m))


def manual_alignment(
    d_hat: DepthMap,
    d_ori: DepthMap,
    unedited: Mask,
    scale: float,
    shift: float,
    erode_radius: int = 0,
) -> Alignment:
    """User-supplied (s, t) with the residual recomputed over the overlap."""
    if not (np.isfinite(scale) and scale != 0.0 and np.isfinite(shift)):
        raise ValidationError(f"manual alignment ({scale}, {shift}) must be finite, scale nonzero")
    dh, d = _overlap(d_hat, d_ori, unedited, erode_radius)
    m = dh.size
    if m < 2:
        raise InsufficientOverlapError(f"need >= 2 overlapping pixels, got {m}")
    r = scale * dh + shift - d
    rmse = float(np.sqrt((r * r).sum() / m))
    return Alignment(float(scale), float(shift), rmse, int(m))


def alignment_energy(d_hat: DepthMap, d_ori: DepthMap, unedited: Mask, scale: float, shift: float) -> float:
    """Summed squared pixel distance for a candidate (s, t); test hook."""
    dh, d = _overlap(d_hat, d_ori, unedited, 0)
    r = scale * dh + shift - d
    return float((r * r).sum())


def merge_depth(d_ori: DepthMap, d_hat: DepthMap, align: Alignment, mask: Mask) -> DepthMap:
    """Per-pixel selection: aligned d_hat inside the mask, d_ori outside."""
    if not (d_ori.shape == d_hat.shape == mask.shape):
        raise DimensionError(
            f"shapes differ: d_ori {d_ori.shape}, d_hat {d_hat.shape}, mask {mask.shape}"
        )
    missing_edit = mask.bits & ~d_hat.validity
    if missing_edit.any():
        v, u = np.argwhere(missing_edit)[0]
        raise IncompleteDepthError(u, v, "edited depth required inside mask")
    missing_ori = ~mask.bits & ~d_ori.validity
    if missing_ori.any():
        v, u = np.argwhere(missing_ori)[0]
        raise IncompleteDepthError(u, v, "original depth required outside mask")
    merged = np.where(mask.bits, align.scale * d_hat.values + align.shift, d_ori.values)
    return DepthMap(merged, np.ones(mask.shape, dtype=bool))
