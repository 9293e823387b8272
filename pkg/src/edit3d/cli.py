"""Batch front door: run pipeline stages or whole sessions from files.

Structured results go to stdout as JSON; progress and errors go to stderr.
Exit codes: 0 success, 1 I/O, 2 validation/degenerate input, 3 internal.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io as eio
from . import pipeline as pl
from . import synth as sy
from .alignment import manual_alignment, normalize_depth, solve_alignment
from .errors import Edit3dError, StageError, ValidationError
from .geometry import Mask
from .maskmesh import save_obj

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_INTERNAL = 3


def _emit(obj):
    def default(x):
        if isinstance(x, float) and x == float("inf"):
            return "inf"
        raise TypeError(f"not serializable: {x!r}")

    # floats that are inf must be caught before json touches them
    def clean(x):
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        if isinstance(x, float) and x == float("inf"):
            return "inf"
        return x

    print(json.dumps(clean(obj), indent=2, sort_keys=True, default=default))


def _log(msg: str):
    print(msg, file=sys.stderr)


def cmd_align(args) -> int:
    d_hat = eio.read_pfm(args.d_hat)
    d_ori = eio.read_pfm(args.d_ori)
    mask = eio.read_mask_png(args.mask)
    unedited = mask.complement()
    normalized = d_hat if args.no_normalize else normalize_depth(d_hat)
    if args.scale is not None or args.shift is not None:
        if args.scale is None or args.shift is None:
            raise ValidationError("manual alignment needs both --scale and --shift")
        align = manual_alignment(normalized, d_ori, unedited, args.scale, args.shift, args.erode)
    else:
        align = solve_alignment(normalized, d_ori, unedited, args.erode)
    result = align.to_dict()
    if args.out:
        with open(args.out, "w") as f:
            json.dump(result, f, indent=2, sort_keys=True)
    _emit(result)
    return EXIT_OK


def cmd_masks(args) -> int:
    session = eio.load_session_dir(args.session)
    arts = pl.run_stages(session)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, m in enumerate(arts.masks):
        eio.write_mask_png(out / (eio.MASK_NAME % i), m)
    if args.obj:
        save_obj(arts.mesh, args.obj)
    _emit({"frames": len(arts.masks), "out": str(out), "alignment": arts.alignment.to_dict()})
    return EXIT_OK


def cmd_render(args) -> int:
    session = eio.load_session_dir(args.session)
    arts = pl.run_stages(session)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, rf in enumerate(arts.renders):
        eio.write_image_png(out / (eio.PCR_NAME % i), rf.color)
        eio.write_pfm(out / (eio.PCR_DEPTH_NAME % i), rf.depth)
        eio.write_mask_png(out / (eio.COVERAGE_NAME % i), rf.coverage)
    _emit({"frames": len(arts.renders), "out": str(out), "points": len(arts.cloud)})
    return EXIT_OK


def cmd_run(args) -> int:
    session = eio.load_session_dir(args.session)
    pack = pl.run_session(session)
    manifest = eio.write_pack_dir(pack, args.out)
    _log(f"pack written to {args.out}")
    _emit(manifest)
    return EXIT_OK


def cmd_eval(args) -> int:
    pack_dir = Path(args.pack)
    oracle_dir = Path(args.oracle)
    manifest = eio.read_manifest(pack_dir)
    n = int(manifest["frames"])
    if n < 1:
        raise ValidationError("pack contains no frames")

    pack_masks = [eio.read_mask_png(pack_dir / "masks" / (eio.MASK_NAME % i)) for i in range(n)]
    pack_frames = [eio.read_image_png(pack_dir / "frames" / (eio.FRAME_NAME % i)) for i in range(n)]
    pcr = [eio.read_image_png(pack_dir / "pcr" / (eio.PCR_NAME % i)) for i in range(n)]

    result = {"frames": n, "alignment": manifest.get("alignment", {})}
    result["psnr_unedited_db"] = pl.masked_psnr(pcr, pack_frames, pack_masks)

    if (oracle_dir / "manifest.json").exists():
        # reference is another pack: compare guidance and masks directly
        ref_masks = [eio.read_mask_png(oracle_dir / "masks" / (eio.MASK_NAME % i)) for i in range(n)]
        ref_pcr = [eio.read_image_png(oracle_dir / "pcr" / (eio.PCR_NAME % i)) for i in range(n)]
        result["psnr_vs_reference_db"] = pl.masked_psnr(pcr, ref_pcr, ref_masks)
        per_frame, mean = pl.mask_iou(pack_masks, ref_masks)
        result["iou"] = {"per_frame": per_frame, "mean": mean}
        _emit(result)
        return EXIT_OK

    gt_masks_dir = oracle_dir / "gt" / "masks"
    if gt_masks_dir.exists():
        truth = [eio.read_mask_png(gt_masks_dir / (eio.MASK_NAME % i)) for i in range(n)]
        per_frame, mean = pl.mask_iou(pack_masks, truth)
        result["iou"] = {"per_frame": per_frame, "mean": mean}
        gt_edited_dir = oracle_dir / "gt" / "edited"
        if gt_edited_dir.exists():
            edited = [eio.read_image_png(gt_edited_dir / (eio.FRAME_NAME % i)) for i in range(n)]
            # reconstruction quality of the guidance vs the edited scene, full frame
            none = [Mask.full(pcr[0].height, pcr[0].width) for _ in range(n)]
            result["psnr_guidance_db"] = pl.masked_psnr(pcr, edited, none)
    _emit(result)
    return EXIT_OK


def cmd_synth(args) -> int:
    with open(args.spec) as f:
        spec = sy.SceneSpec.from_dict(json.load(f))
    if spec.edit is None:
        raise ValidationError("scene spec needs an edit to synthesize a session")
    out = Path(args.out)

    kwargs, truth = sy.session_inputs(spec, args.depth_scale, args.depth_shift)
    options = {
        "epsilon": args.epsilon,
        "splat_radius": args.splat_radius,
        "prompt": args.prompt,
        "alignment": {"auto": True},
        "seed": args.seed,
    }
    eio.save_session_dir(
        out,
        frames=kwargs["frames"],
        cameras=kwargs["cameras"],
        d_ori=kwargs["d_ori"],
        edited_image=kwargs["edited_image"],
        edited_depth=kwargs["edited_depth_raw"],
        mask=kwargs["mask"],
        options=options,
    )
    (out / "gt" / "masks").mkdir(parents=True, exist_ok=True)
    (out / "gt" / "edited").mkdir(parents=True, exist_ok=True)
    for i, m in enumerate(truth["masks"]):
        eio.write_mask_png(out / "gt" / "masks" / (eio.MASK_NAME % i), m)
    for i, fr in enumerate(truth["edited_frames"]):
        eio.write_image_png(out / "gt" / "edited" / (eio.FRAME_NAME % i), fr)
    with open(out / "scene.json", "w") as f:
        f.write(spec.to_json())
    _emit({"out": str(out), "frames": spec.trajectory.frames,
           "depth_scale": args.depth_scale, "depth_shift": args.depth_shift})
    return EXIT_OK


def cmd_perturb(args) -> int:
    depth = eio.read_pfm(args.depth)
    mask = eio.read_mask_png(args.mask)
    out = pl.perturb_depth(depth, mask, args.mode, args.magnitude, args.seed)
    eio.write_pfm(args.out, out)
    _emit({"out": str(args.out), "mode": args.mode, "magnitude": args.magnitude, "seed": args.seed})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edit3d", description=__doc__)
    p.add_argument("--threads", type=int, default=0,
                   help="worker threads, 0 = auto (results never depend on it)")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("align", help="solve or accept depth scale/shift alignment")
    a.add_argument("--d-hat", required=True, help="relative depth PFM")
    a.add_argument("--d-ori", required=True, help="scene depth PFM")
    a.add_argument("--mask", required=True, help="edit mask PNG (true = edited)")
    a.add_argument("--scale", type=float, default=None, help="manual scale override")
    a.add_argument("--shift", type=float, default=None, help="manual shift override")
    a.add_argument("--erode", type=int, default=0, help="erode unedited region this many px")
    a.add_argument("--no-normalize", action="store_true",
                   help="solve on d-hat as-is instead of min-max normalizing first")
    a.add_argument("--out", default=None, help="also write alignment JSON here")
    a.set_defaults(func=cmd_align)

    m = sub.add_parser("masks", help="propagate the edit mask to every frame")
    m.add_argument("--session", required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--obj", default=None, help="also dump the mask mesh as OBJ")
    m.set_defaults(func=cmd_masks)

    r = sub.add_parser("render", help="render the edited point cloud per frame")
    r.add_argument("--session", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_render)

    runp = sub.add_parser("run", help="run a whole session into a condition pack")
    runp.add_argument("--session", required=True)
    runp.add_argument("--out", required=True)
    runp.set_defaults(func=cmd_run)

    e = sub.add_parser("eval", help="score a pack against a synthetic oracle")
    e.add_argument("--pack", required=True)
    e.add_argument("--oracle", required=True, help="session directory with gt/")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="generate a synthetic session from a scene spec")
    s.add_argument("--spec", required=True, help="scene spec JSON")
    s.add_argument("--out", required=True)
    s.add_argument("--depth-scale", type=float, default=2.0)
    s.add_argument("--depth-shift", type=float, default=0.5)
    s.add_argument("--epsilon", type=float, default=0.02)
    s.add_argument("--splat-radius", type=int, default=1)
    s.add_argument("--prompt", default="")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    pb = sub.add_parser("perturb", help="distort masked depth (noise or shift)")
    pb.add_argument("--depth", required=True)
    pb.add_argument("--mask", required=True)
    pb.add_argument("--mode", choices=("noise", "shift"), required=True)
    pb.add_argument("--magnitude", type=float, required=True)
    pb.add_argument("--seed", type=int, default=0)
    pb.add_argument("--out", required=True)
    pb.set_defaults(func=cmd_perturb)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, FileNotFoundError) as err:
        _log(f"error: {err}")
        return EXIT_IO
    except StageError as err:
        _log(f"error: {err}")
        return EXIT_VALIDATION if not isinstance(err.cause, OSError) else EXIT_IO
    except Edit3dError as err:
        _log(f"error: {err}")
        return EXIT_VALIDATION
    except Exception as err:  # noqa: BLE001 - anything else is an internal bug
        _log(f"internal error: {err!r}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
