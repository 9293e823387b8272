"""File interchange: PFM depth, PNG rasters, camera JSON, session dirs, packs.

Depth maps travel as little-endian PFM (scale -1.0) with NaN marking invalid
pixels; images and masks as PNG.  A "session directory" is the single
interchange convention shared by the CLI, the HTTP service, and the tests:

    session/
      frames/frame_0000.png ...    input video frames
      cameras.json                 per-frame pinhole cameras
      d_ori.pfm                    frame-1 scene depth
      edited.png                   edited first frame
      edited_depth.pfm             relative depth of the edited frame
      mask.png                     2-D edit mask (frame 1)
      session.json                 options: epsilon, splat_radius, prompt,
                                   alignment {auto}|{scale,shift}, seed
"""

from __future__ import annotations

import hashlib
import io as _io
import json
import zipfile
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import ValidationError
from .geometry import Camera, DepthMap, Image, Mask


# ---------------------------------------------------------------------------
# PFM

def write_pfm(path, depth: DepthMap):
    """Single-channel PFM, little-endian (scale -1.0), NaN = invalid."""
    data = np.where(depth.validity, depth.values, np.nan).astype(np.float32)
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{depth.width} {depth.height}\n".encode())
        f.write(b"-1.0\n")
        f.write(np.flipud(data).tobytes())  # PFM scanlines run bottom-up


def read_pfm(path) -> DepthMap:
    with open(path, "rb") as f:
        tag = f.readline().strip()
        if tag != b"Pf":
            raise ValidationError(f"{path}: not a single-channel PFM (header {tag!r})")
        dims = f.readline().split()
        width, height = int(dims[0]), int(dims[1])
        scale = float(f.readline().strip())
        buf = f.read(width * height * 4)
    if len(buf) != width * height * 4:
        raise ValidationError(f"{path}: truncated PFM payload")
    data = np.frombuffer(buf, dtype="<f4" if scale < 0 else ">f4")
    data = np.flipud(data.reshape(height, width)).astype(np.float64)
    valid = np.isfinite(data)
    return DepthMap(np.where(valid, data, np.nan), valid)


# ---------------------------------------------------------------------------
# PNG

def write_image_png(path, image: Image):
    u8 = np.round(image.values * 255.0).astype(np.uint8)
    PILImage.fromarray(u8, mode="RGB").save(path, format="PNG")


def read_image_png(path) -> Image:
    with PILImage.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return Image(arr)


def write_mask_png(path, mask: Mask):
    u8 = np.where(mask.bits, 255, 0).astype(np.uint8)
    PILImage.fromarray(u8, mode="L").save(path, format="PNG")


def read_mask_png(path) -> Mask:
    with PILImage.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return Mask(arr != 0)


def image_png_bytes(image: Image) -> bytes:
    buf = _io.BytesIO()
    u8 = np.round(image.values * 255.0).astype(np.uint8)
    PILImage.fromarray(u8, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def mask_png_bytes(mask: Mask) -> bytes:
    buf = _io.BytesIO()
    u8 = np.where(mask.bits, 255, 0).astype(np.uint8)
    PILImage.fromarray(u8, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def mask_from_png_bytes(data: bytes) -> Mask:
    with PILImage.open(_io.BytesIO(data)) as im:
        arr = np.asarray(im.convert("L"))
    return Mask(arr != 0)


def image_from_png_bytes(data: bytes) -> Image:
    with PILImage.open(_io.BytesIO(data)) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return Image(arr)


# ---------------------------------------------------------------------------
# cameras JSON

def camera_to_dict(cam: Camera) -> dict:
    return {
        "frame": cam.frame_index,
        "fx": cam.fx,
        "fy": cam.fy,
        "cx": cam.cx,
        "cy": cam.cy,
        "R": [float(x) for x in cam.rotation.reshape(-1)],  # row-major
        "t": [float(x) for x in cam.translation],
        "width": cam.width,
        "height": cam.height,
    }


def camera_from_dict(d: dict) -> Camera:
    return Camera(
        fx=float(d["fx"]),
        fy=float(d["fy"]),
        cx=float(d["cx"]),
        cy=float(d["cy"]),
        rotation=np.asarray(d["R"], dtype=np.float64).reshape(3, 3),
        translation=np.asarray(d["t"], dtype=np.float64),
        width=int(d["width"]),
        height=int(d["height"]),
        frame_index=int(d.get("frame", 0)),
    )


def write_cameras_json(path, cameras: list[Camera]):
    with open(path, "w") as f:
        json.dump([camera_to_dict(c) for c in cameras], f, indent=2, sort_keys=True)


def read_cameras_json(path) -> list[Camera]:
    with open(path) as f:
        entries = json.load(f)
    cams = [camera_from_dict(d) for d in entries]
    cams.sort(key=lambda c: c.frame_index)
    return cams


# ---------------------------------------------------------------------------
# session directories

FRAME_NAME = "frame_%04d.png"
MASK_NAME = "mask_%04d.png"
PCR_NAME = "pcr_%04d.png"
PCR_DEPTH_NAME = "pcr_%04d.pfm"
COVERAGE_NAME = "cov_%04d.png"
MASKED_NAME = "masked_%04d.png"


def save_session_dir(
    directory,
    frames: list[Image],
    cameras: list[Camera],
    d_ori: DepthMap,
    edited_image: Image,
    edited_depth: DepthMap,
    mask: Mask,
    options: dict | None = None,
):
    directory = Path(directory)
    (directory / "frames").mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        write_image_png(directory / "frames" / (FRAME_NAME % i), frame)
    write_cameras_json(directory / "cameras.json", cameras)
    write_pfm(directory / "d_ori.pfm", d_ori)
    write_image_png(directory / "edited.png", edited_image)
    write_pfm(directory / "edited_depth.pfm", edited_depth)
    write_mask_png(directory / "mask.png", mask)
    with open(directory / "session.json", "w") as f:
        json.dump(options or {}, f, indent=2, sort_keys=True)


def load_session_dir(directory):
    """Read a session directory; returns the EditSession from pipeline."""
    from .pipeline import EditSession  # local import: io stays importable alone

    directory = Path(directory)
    cam_path = directory / "cameras.json"
    if not cam_path.exists():
        raise FileNotFoundError(f"missing {cam_path}")
    cameras = read_cameras_json(cam_path)
    frames_dir = directory / "frames"
    frame_paths = sorted(frames_dir.glob("frame_*.png"))
    if len(frame_paths) != len(cameras):
        raise ValidationError(
            f"{len(frame_paths)} frames but {len(cameras)} cameras in {directory}"
        )
    frames = [read_image_png(p) for p in frame_paths]
    d_ori = read_pfm(directory / "d_ori.pfm")
    edited_image = read_image_png(directory / "edited.png")
    edited_depth = read_pfm(directory / "edited_depth.pfm")
    mask = read_mask_png(directory / "mask.png")
    options = {}
    opt_path = directory / "session.json"
    if opt_path.exists():
        with open(opt_path) as f:
            options = json.load(f)

    align = options.get("alignment", {"auto": True})
    override = None
    if isinstance(align, dict) and not align.get("auto", False) and "scale" in align:
        override = (float(align["scale"]), float(align["shift"]))
    return EditSession(
        frames=frames,
        cameras=cameras,
        d_ori=d_ori,
        edited_image=edited_image,
        edited_depth_raw=edited_depth,
        mask=mask,
        alignment_override=override,
        epsilon=float(options.get("epsilon", 0.02)),
        splat_radius=int(options.get("splat_radius", 1)),
        prompt=str(options.get("prompt", "")),
        seed=int(options.get("seed", 0)),
        erode_radius=int(options.get("erode_radius", 0)),
    )


# ---------------------------------------------------------------------------
# condition packs

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_pack_dir(pack, directory) -> dict:
    """Write a ConditionPack; returns the manifest (with checksums)."""
    directory = Path(directory)
    for sub in ("frames", "masks", "pcr", "masked"):
        (directory / sub).mkdir(parents=True, exist_ok=True)
    n = len(pack.masks)
    for i in range(n):
        write_image_png(directory / "frames" / (FRAME_NAME % i), pack.frames[i])
        write_mask_png(directory / "masks" / (MASK_NAME % i), pack.masks[i])
        rf = pack.point_renders[i]
        write_image_png(directory / "pcr" / (PCR_NAME % i), rf.color)
        write_pfm(directory / "pcr" / (PCR_DEPTH_NAME % i), rf.depth)
        write_mask_png(directory / "pcr" / (COVERAGE_NAME % i), rf.coverage)
        write_image_png(directory / "masked" / (MASKED_NAME % i), pack.masked_originals[i])
    write_image_png(directory / "edited_ref.png", pack.edited_ref)

    checksums = {}
    for path in sorted(directory.rglob("*")):
        if path.is_file() and path.name != "manifest.json":
            checksums[path.relative_to(directory).as_posix()] = sha256_file(path)
    manifest = dict(pack.manifest)
    manifest["checksums"] = checksums
    with open(directory / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return manifest


def read_manifest(directory) -> dict:
    with open(Path(directory) / "manifest.json") as f:
        return json.load(f)


def verify_pack_dir(directory) -> bool:
    """Recompute every checksum recorded in the manifest."""
    directory = Path(directory)
    manifest = read_manifest(directory)
    for rel, expect in manifest.get("checksums", {}).items():
        if sha256_file(directory / rel) != expect:
            return False
    return True


def pack_dir_to_zip_bytes(directory) -> bytes:
    """Deterministic zip of a pack tree (fixed timestamps, sorted paths)."""
    directory = Path(directory)
    buf = _io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_DEFLATED, compresslevel=6) as zf:
        for path in sorted(directory.rglob("*")):
            if not path.is_file():
                continue
            info = zipfile.ZipInfo(path.relative_to(directory).as_posix(), date_time=(1980, 1, 1, 0, 0, 0))
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o644 << 16
            with open(path, "rb") as f:
                zf.writestr(info, f.read())
    return buf.getvalue()
