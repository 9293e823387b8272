"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they complete.  Budgets and tolerances are fixed here, not tuned at
runtime.
"""

import hashlib
import io as _io
import json
import threading
import time
import urllib.request
import zipfile
from contextlib import contextmanager

import numpy as np
import pytest

from edit3d import cli
from edit3d import io as eio
from edit3d import pipeline as pl
from edit3d import synth as sy
from edit3d.alignment import alignment_energy, solve_alignment
from edit3d.geometry import DepthMap, Image, Mask, backproject, project_depth
from edit3d.service import serve

from conftest import random_camera


@contextmanager
def criterion(name, budget=None):
    t0 = time.perf_counter()
    ok = False
    try:
        yield
        ok = True
    finally:
        dt = time.perf_counter() - t0
        print(f"[acceptance] {'PASS' if ok else 'FAIL'}  {name}  ({dt:.2f}s)", flush=True)
    if budget is not None:
        assert dt < budget, f"{name}: runtime {dt:.2f}s exceeds {budget}s budget"


def test_alignment_exactness():
    # 50 randomized affine pairs: recovery to 1e-9 relative, residual zero
    with criterion("alignment exactness (50 affine pairs, 1e-9)", budget=1.0):
        rng = np.random.default_rng(101)
        for _ in range(50):
            d = DepthMap.from_values(rng.uniform(1.0, 6.0, (48, 64)))
            s0 = rng.uniform(0.1, 10.0)
            t0 = rng.uniform(-5.0, 5.0)
            d_hat = DepthMap.from_values((d.values - t0) / s0)
            a = solve_alignment(d_hat, d, Mask.full(48, 64, False).complement())
            assert abs(a.scale - s0) <= 1e-9 * abs(s0)
            assert abs(a.shift - t0) <= 1e-9 * max(1.0, abs(t0))
            assert a.residual_rmse < 1e-10


def test_alignment_optimality():
    # finite-difference first-order conditions on 50 noisy instances
    with criterion("alignment optimality (FD check, delta 1e-4)", budget=1.0):
        rng = np.random.default_rng(202)
        delta = 1e-4
        for _ in range(50):
            d_hat = DepthMap.from_values(rng.uniform(0.0, 1.0, (24, 32)))
            d = DepthMap.from_values(
                rng.uniform(0.5, 3.0) * d_hat.values + rng.uniform(-1, 1)
                + rng.normal(0, 0.05, (24, 32))
            )
            un = Mask.full(24, 32, True)
            a = solve_alignment(d_hat, d, un)
            e0 = alignment_energy(d_hat, d, un, a.scale, a.shift)
            assert alignment_energy(d_hat, d, un, a.scale + delta, a.shift) >= e0
            assert alignment_energy(d_hat, d, un, a.scale - delta, a.shift) >= e0
            assert alignment_energy(d_hat, d, un, a.scale, a.shift + delta) >= e0
            assert alignment_energy(d_hat, d, un, a.scale, a.shift - delta) >= e0


def test_merge_exactness():
    # merged depth equals the per-pixel branch formula with zero deviation
    with criterion("depth merge exactness (bitwise)", budget=1.0):
        from edit3d.alignment import Alignment, merge_depth

        rng = np.random.default_rng(303)
        for _ in range(20):
            h, w = int(rng.integers(4, 40)), int(rng.integers(4, 40))
            d_ori = DepthMap.from_values(rng.uniform(1, 5, (h, w)))
            d_hat = DepthMap.from_values(rng.uniform(0, 1, (h, w)))
            mask = Mask(rng.uniform(size=(h, w)) < rng.uniform(0.1, 0.9))
            align = Alignment(rng.uniform(0.5, 4.0), rng.uniform(-1, 1), 0.0, 10)
            merged = merge_depth(d_ori, d_hat, align, mask)
            expect = np.where(mask.bits, align.scale * d_hat.values + align.shift, d_ori.values)
            assert np.array_equal(merged.values, expect)


def test_backprojection_roundtrip():
    # project_depth(backproject(d)) == d to 1e-6 for 10 random cameras
    with criterion("back-projection round trip (10 cameras, 1e-6)", budget=1.0):
        rng = np.random.default_rng(404)
        for _ in range(10):
            cam = random_camera(rng, 64, 48)
            depth = DepthMap.from_values(rng.uniform(0.5, 8.0, (48, 64)))
            img = Image(rng.uniform(0, 1, (48, 64, 3)))
            back = project_depth(backproject(depth, img, cam), cam)
            assert np.array_equal(back.validity, depth.validity)
            assert np.abs(back.values - depth.values).max() < 1e-6


def test_mask_propagation_accuracy():
    # box insertion, 16-frame orbit + dolly at 128x96, epsilon 0.02
    with criterion("mask propagation IoU (orbit + dolly)", budget=10.0):
        for trajectory in ("orbit", "dolly"):
            spec = sy.insertion_scene(trajectory, frames=16)
            assert (spec.width, spec.height) == (128, 96)
            kwargs, truth = sy.session_inputs(spec)
            session = pl.EditSession(**kwargs, epsilon=0.02)
            arts = pl.run_stages(session)
            per_frame, mean = pl.mask_iou(arts.masks, truth["masks"])
            assert mean >= 0.95, f"{trajectory}: mean IoU {mean:.4f} < 0.95"
            assert per_frame[0] >= 0.98, f"{trajectory}: frame-1 IoU {per_frame[0]:.4f} < 0.98"


def test_depth_distortion_robustness():
    # noise and +-shift perturbations of the masked depth: guidance PSNR
    # degrades monotonically over {0%, 10%, 20%} of the masked range
    with criterion("depth-distortion robustness (noise, +-shift)", budget=30.0):
        spec = sy.deep_box_scene(frames=16, step_deg=2.0)
        kwargs, truth = sy.session_inputs(spec)
        session = pl.EditSession(**kwargs, epsilon=0.02)
        full_frame = [Mask.full(spec.height, spec.width) for _ in range(16)]
        for mode, mags in (("noise", [0.0, 0.1, 0.2]),
                           ("shift", [0.0, 0.1, 0.2]),
                           ("shift", [0.0, -0.1, -0.2])):
            curve = pl.robustness_curve(session, truth["edited_frames"], full_frame, mode, mags, seed=7)
            psnrs = [p for _, p in curve]
            label = f"{mode} {'+' if mags[-1] > 0 else '-'}"
            assert psnrs[0] > psnrs[1] > psnrs[2], f"{label}: not monotone: {psnrs}"


@pytest.fixture(scope="module")
def oracle_session_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance_synth")
    spec_path = root / "scene.json"
    spec_path.write_text(sy.insertion_scene("orbit", frames=8).to_json())
    out = root / "session"
    assert cli.main(["synth", "--spec", str(spec_path), "--out", str(out), "--seed", "3"]) == 0
    return out


def test_cmd_run_determinism(oracle_session_dir, tmp_path):
    # identical invocations produce byte-identical packs
    with criterion("cmd_run determinism (byte-identical checksums)"):
        manifests = []
        for name in ("one", "two"):
            out = tmp_path / name
            assert cli.main(["run", "--session", str(oracle_session_dir), "--out", str(out)]) == 0
            manifests.append(eio.read_manifest(out))
        assert manifests[0]["checksums"] == manifests[1]["checksums"]
        for rel in manifests[0]["checksums"]:
            a = (tmp_path / "one" / rel).read_bytes()
            b = (tmp_path / "two" / rel).read_bytes()
            assert a == b, f"bytes differ: {rel}"


def test_cli_service_equivalence(oracle_session_dir, tmp_path):
    # the pack downloaded over HTTP equals the cmd_run output
    with criterion("CLI/service pack equivalence (checksums)"):
        pack_dir = tmp_path / "cli_pack"
        assert cli.main(["run", "--session", str(oracle_session_dir), "--out", str(pack_dir)]) == 0

        srv = serve(host="127.0.0.1", port=0)
        thread = threading.Thread(target=srv.serve_forever, daemon=True)
        thread.start()
        try:
            base = f"http://127.0.0.1:{srv.server_address[1]}"
            fields = []
            for p in sorted((oracle_session_dir / "frames").glob("frame_*.png")):
                fields.append(("frames", p.name, p.read_bytes()))
            for name in ("cameras.json", "d_ori.pfm", "edited.png", "edited_depth.pfm", "session.json"):
                field = name.split(".")[0] if name != "cameras.json" else "cameras"
                if name == "edited.png":
                    field = "edited"
                fields.append((field, name, (oracle_session_dir / name).read_bytes()))
            boundary = "acceptanceboundary42"
            body = _io.BytesIO()
            for fname, filename, payload in fields:
                body.write(f'--{boundary}\r\nContent-Disposition: form-data; name="{fname}"; '
                           f'filename="{filename}"\r\n\r\n'.encode())
                body.write(payload)
                body.write(b"\r\n")
            body.write(f"--{boundary}--\r\n".encode())

            def call(method, path, data=None, headers=None):
                req = urllib.request.Request(base + path, data=data, method=method, headers=headers or {})
                with urllib.request.urlopen(req) as resp:
                    return resp.status, resp.read()

            status, payload = call("POST", "/sessions", body.getvalue(),
                                   {"Content-Type": f"multipart/form-data; boundary={boundary}"})
            assert status == 201
            sid = json.loads(payload)["id"]
            status, _ = call("PUT", f"/sessions/{sid}/mask", (oracle_session_dir / "mask.png").read_bytes())
            assert status == 204
            status, _ = call("PUT", f"/sessions/{sid}/alignment", json.dumps({"auto": True}).encode())
            assert status == 200
            status, _ = call("POST", f"/sessions/{sid}/propagate")
            assert status == 200
            status, zip_bytes = call("GET", f"/sessions/{sid}/pack")
            assert status == 200
        finally:
            srv.shutdown()

        zf = zipfile.ZipFile(_io.BytesIO(zip_bytes))
        names = set(zf.namelist())
        disk = {p.relative_to(pack_dir).as_posix() for p in pack_dir.rglob("*") if p.is_file()}
        assert names == disk
        for name in sorted(names):
            served = hashlib.sha256(zf.read(name)).hexdigest()
            local = hashlib.sha256((pack_dir / name).read_bytes()).hexdigest()
            assert served == local, f"mismatch: {name}"
