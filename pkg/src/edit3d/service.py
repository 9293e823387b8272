"""Thin HTTP facade over the pipeline for the interactive UI.

Sessions are held in memory (optionally written through to a store
directory); per-session mutations are serialized by a lock.  Built on the
standard library's threading HTTP server so the tool runs anywhere the
package does.

    POST /sessions                      multipart upload -> 201 {id}
    GET  /sessions/{id}                 state summary
    PUT  /sessions/{id}/mask            PNG body -> 204
    PUT  /sessions/{id}/alignment       {"auto": true} | {scale, shift}
    POST /sessions/{id}/propagate       -> 200 {"frames": N}
    GET  /sessions/{id}/frames/{i}/preview?kind=pcr|mask|overlay|masked
    GET  /sessions/{id}/pack            zip of the condition pack
"""

from __future__ import annotations

import argparse
import json
import re
import tempfile
import threading
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from . import io as eio
from . import pipeline as pl
from .errors import Edit3dError, StageError
from .geometry import Image, Mask

PREVIEW_KINDS = ("pcr", "mask", "overlay", "masked")

STATE_CREATED = "created"
STATE_MASKED = "masked"
STATE_ALIGNED = "aligned"
STATE_PROPAGATED = "propagated"


class HttpError(Exception):
    def __init__(self, status: int, body: dict):
        self.status = status
        self.body = body
        super().__init__(f"{status}: {body}")


def parse_multipart(body: bytes, content_type: str):
    """Minimal multipart/form-data parser: [(name, filename, payload)]."""
    m = re.search(r'boundary="?([^";]+)"?', content_type)
    if not m:
        raise HttpError(422, {"error": "missing multipart boundary"})
    boundary = b"--" + m.group(1).encode()
    parts = []
    chunks = body.split(boundary)
    for chunk in chunks[1:-1]:  # first is preamble, last is the trailing '--'
        chunk = chunk.lstrip(b"\r\n")
        if not chunk or chunk in (b"--", b"--\r\n"):
            continue
        try:
            header_blob, payload = chunk.split(b"\r\n\r\n", 1)
        except ValueError:
            continue
        if payload.endswith(b"\r\n"):
            payload = payload[:-2]
        name, filename = None, None
        for line in header_blob.split(b"\r\n"):
            text = line.decode("utf-8", "replace")
            if text.lower().startswith("content-disposition"):
                nm = re.search(r'name="([^"]*)"', text)
                fn = re.search(r'filename="([^"]*)"', text)
                name = nm.group(1) if nm else None
                filename = fn.group(1) if fn else None
        if name is not None:
            parts.append((name, filename, payload))
    return parts


class SessionRecord:
    def __init__(self, sid: str, frames, cameras, d_ori, edited_image, edited_depth, options):
        self.id = sid
        self.frames = frames
        self.cameras = cameras
        self.d_ori = d_ori
        self.edited_image = edited_image
        self.edited_depth = edited_depth
        self.options = options
        self.mask = None
        self.alignment_request = None  # {"auto": True} | {"scale": s, "shift": t}
        self.alignment = None  # solved Alignment
        self.artifacts = None
        self.pack_zip = None
        self.previews = {}
        self.lock = threading.Lock()

    @property
    def state(self) -> str:
        if self.artifacts is not None:
            return STATE_PROPAGATED
        if self.alignment is not None:
            return STATE_ALIGNED
        if self.mask is not None:
            return STATE_MASKED
        return STATE_CREATED

    def invalidate_downstream(self, keep_alignment: bool):
        if not keep_alignment:
            self.alignment = None
            self.alignment_request = None
        self.artifacts = None
        self.pack_zip = None
        self.previews = {}

    def build_session(self) -> pl.EditSession:
        if self.mask is None:
            raise HttpError(409, {"error": "session has no mask yet"})
        override = None
        if self.alignment_request and not self.alignment_request.get("auto", False):
            override = (
                float(self.alignment_request["scale"]),
                float(self.alignment_request["shift"]),
            )
        return pl.EditSession(
            frames=self.frames,
            cameras=self.cameras,
            d_ori=self.d_ori,
            edited_image=self.edited_image,
            edited_depth_raw=self.edited_depth,
            mask=self.mask,
            alignment_override=override,
            epsilon=float(self.options.get("epsilon", 0.02)),
            splat_radius=int(self.options.get("splat_radius", 1)),
            prompt=str(self.options.get("prompt", "")),
            seed=int(self.options.get("seed", 0)),
            erode_radius=int(self.options.get("erode_radius", 0)),
        )

    def summary(self) -> dict:
        out = {
            "id": self.id,
            "state": self.state,
            "frames": len(self.frames),
            "width": self.frames[0].width,
            "height": self.frames[0].height,
        }
        if self.alignment is not None:
            out["alignment"] = self.alignment.to_dict()
        return out


class EditApp:
    """Framework-free request handlers; the HTTP layer just dispatches."""

    def __init__(self, store_dir=None):
        self.sessions: dict[str, SessionRecord] = {}
        self.store_dir = Path(store_dir) if store_dir else None
        self.global_lock = threading.Lock()
        if self.store_dir is not None:
            self.store_dir.mkdir(parents=True, exist_ok=True)
            self._load_store()

    # -- persistence -------------------------------------------------------

    def _load_store(self):
        for sub in sorted(self.store_dir.iterdir()):
            if not (sub / "cameras.json").exists():
                continue
            try:
                session = eio.load_session_dir(sub)
            except Exception:
                continue
            rec = SessionRecord(
                sub.name,
                session.frames,
                session.cameras,
                session.d_ori,
                session.edited_image,
                session.edited_depth_raw,
                {
                    "epsilon": session.epsilon,
                    "splat_radius": session.splat_radius,
                    "prompt": session.prompt,
                    "seed": session.seed,
                    "erode_radius": session.erode_radius,
                },
            )
            if session.mask.bits.any():
                rec.mask = session.mask
            self.sessions[sub.name] = rec

    def _persist(self, rec: SessionRecord):
        if self.store_dir is None:
            return
        options = dict(rec.options)
        if rec.alignment_request is not None:
            options["alignment"] = rec.alignment_request
        eio.save_session_dir(
            self.store_dir / rec.id,
            frames=rec.frames,
            cameras=rec.cameras,
            d_ori=rec.d_ori,
            edited_image=rec.edited_image,
            edited_depth=rec.edited_depth,
            mask=rec.mask if rec.mask is not None else Mask.full(rec.frames[0].height, rec.frames[0].width),
            options=options,
        )

    # -- handlers ----------------------------------------------------------

    def _get(self, sid: str) -> SessionRecord:
        rec = self.sessions.get(sid)
        if rec is None:
            raise HttpError(404, {"error": f"unknown session {sid!r}"})
        return rec

    def create_session(self, body: bytes, content_type: str) -> dict:
        parts = parse_multipart(body, content_type)
        frame_parts = []
        fields = {}
        for name, filename, payload in parts:
            if name == "frames":
                frame_parts.append((filename or f"frame_{len(frame_parts):04d}", payload))
            else:
                fields[name] = payload
        for required in ("cameras", "d_ori", "edited", "edited_depth"):
            if required not in fields:
                raise HttpError(422, {"error": f"missing multipart field {required!r}"})
        if not frame_parts:
            raise HttpError(422, {"error": "no frames uploaded"})
        frame_parts.sort(key=lambda kv: kv[0])
        try:
            frames = [eio.image_from_png_bytes(data) for _, data in frame_parts]
            cameras = [eio.camera_from_dict(d) for d in json.loads(fields["cameras"])]
            cameras.sort(key=lambda c: c.frame_index)
            with tempfile.NamedTemporaryFile(suffix=".pfm") as tmp:
                tmp.write(fields["d_ori"])
                tmp.flush()
                d_ori = eio.read_pfm(tmp.name)
            edited = eio.image_from_png_bytes(fields["edited"])
            with tempfile.NamedTemporaryFile(suffix=".pfm") as tmp:
                tmp.write(fields["edited_depth"])
                tmp.flush()
                edited_depth = eio.read_pfm(tmp.name)
            options = json.loads(fields["session"]) if "session" in fields else {}
        except Edit3dError as err:
            raise HttpError(422, {"error": str(err)})
        except (ValueError, KeyError) as err:
            raise HttpError(422, {"error": f"malformed upload: {err}"})
        if len(frames) != len(cameras):
            raise HttpError(422, {"error": f"{len(frames)} frames but {len(cameras)} cameras"})

        sid = uuid.uuid4().hex[:12]
        rec = SessionRecord(sid, frames, cameras, d_ori, edited, edited_depth, options)
        with self.global_lock:
            self.sessions[sid] = rec
        self._persist(rec)
        return rec.summary()

    def get_session(self, sid: str) -> dict:
        return self._get(sid).summary()

    def put_mask(self, sid: str, body: bytes) -> None:
        rec = self._get(sid)
        try:
            mask = eio.mask_from_png_bytes(body)
        except Exception as err:
            raise HttpError(422, {"error": f"bad mask PNG: {err}"})
        if (mask.height, mask.width) != (rec.frames[0].height, rec.frames[0].width):
            raise HttpError(
                422,
                {"error": f"mask {mask.width}x{mask.height} does not match session raster"},
            )
        with rec.lock:
            if rec.mask is not None and np.array_equal(mask.bits, rec.mask.bits):
                return
            rec.mask = mask
            rec.invalidate_downstream(keep_alignment=False)
        self._persist(rec)

    def put_alignment(self, sid: str, body: bytes) -> dict:
        rec = self._get(sid)
        try:
            request = json.loads(body)
        except ValueError as err:
            raise HttpError(422, {"error": f"bad JSON: {err}"})
        if not isinstance(request, dict) or not (
            request.get("auto") is True or ("scale" in request and "shift" in request)
        ):
            raise HttpError(422, {"error": 'alignment body must be {"auto": true} or {scale, shift}'})
        with rec.lock:
            if rec.mask is None:
                raise HttpError(409, {"error": "upload a mask before alignment"})
            if rec.alignment is not None and request == rec.alignment_request:
                return rec.alignment.to_dict()  # idempotent repeat
            rec.alignment_request = request
            rec.artifacts = None
            rec.pack_zip = None
            rec.previews = {}
            try:
                session = rec.build_session()
                _, align = pl.compute_alignment(session)
            except StageError as err:
                rec.alignment = None
                raise HttpError(422, {"error": str(err.cause), "stage": err.stage})
            except Edit3dError as err:
                rec.alignment = None
                raise HttpError(422, {"error": str(err)})
            rec.alignment = align
        self._persist(rec)
        return align.to_dict()

    def propagate(self, sid: str) -> dict:
        rec = self._get(sid)
        with rec.lock:
            if rec.mask is None or rec.alignment is None:
                raise HttpError(409, {"error": "set mask and alignment before propagating"})
            try:
                session = rec.build_session()
                rec.artifacts = pl.run_stages(session)
            except StageError as err:
                raise HttpError(422, {"error": str(err.cause), "stage": err.stage})
            except Edit3dError as err:
                raise HttpError(422, {"error": str(err)})
            rec.pack_zip = None
            rec.previews = {}
        return {"frames": len(rec.frames)}

    def preview(self, sid: str, frame: int, kind: str) -> bytes:
        rec = self._get(sid)
        if kind not in PREVIEW_KINDS:
            raise HttpError(422, {"error": f"kind must be one of {PREVIEW_KINDS}"})
        arts = rec.artifacts
        if arts is None:
            raise HttpError(409, {"error": "propagate before requesting previews"})
        if not (0 <= frame < len(rec.frames)):
            raise HttpError(404, {"error": f"frame {frame} out of range"})
        key = (frame, kind)
        cached = rec.previews.get(key)
        if cached is not None:
            return cached
        if kind == "pcr":
            data = eio.image_png_bytes(arts.renders[frame].color)
        elif kind == "mask":
            data = eio.mask_png_bytes(arts.masks[frame])
        elif kind == "masked":
            data = eio.image_png_bytes(pl.mask_original(rec.frames[frame], arts.masks[frame]))
        else:  # overlay: 50% red tint inside the propagated mask
            frame_vals = rec.frames[frame].values
            tint = np.array([1.0, 0.0, 0.0])
            blended = np.where(
                arts.masks[frame].bits[..., None], 0.5 * frame_vals + 0.5 * tint, frame_vals
            )
            data = eio.image_png_bytes(Image(blended))
        rec.previews.setdefault(key, data)
        return data

    def pack(self, sid: str) -> bytes:
        rec = self._get(sid)
        with rec.lock:
            if rec.artifacts is None:
                raise HttpError(409, {"error": "propagate before downloading the pack"})
            if rec.pack_zip is None:
                session = rec.build_session()
                pack = pl.assemble_pack(session, rec.artifacts)
                with tempfile.TemporaryDirectory() as tmp:
                    eio.write_pack_dir(pack, tmp)
                    rec.pack_zip = eio.pack_dir_to_zip_bytes(tmp)
            return rec.pack_zip


_ROUTES = [
    ("POST", re.compile(r"^/sessions$"), "create"),
    ("GET", re.compile(r"^/sessions/(?P<sid>[0-9a-f]+)$"), "status"),
    ("PUT", re.compile(r"^/sessions/(?P<sid>[0-9a-f]+)/mask$"), "mask"),
    ("PUT", re.compile(r"^/sessions/(?P<sid>[0-9a-f]+)/alignment$"), "alignment"),
    ("POST", re.compile(r"^/sessions/(?P<sid>[0-9a-f]+)/propagate$"), "propagate"),
    (
        "GET",
        re.compile(r"^/sessions/(?P<sid>[0-9a-f]+)/frames/(?P<frame>\d+)/preview$"),
        "preview",
    ),
    ("GET", re.compile(r"^/sessions/(?P<sid>[0-9a-f]+)/pack$"), "pack"),
]


def make_handler(app: EditApp, cors_origin: str = "*"):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet by default; stderr on demand
            pass

        def _send(self, status: int, body: bytes, content_type: str):
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", cors_origin)
            self.end_headers()
            if body:
                self.wfile.write(body)

        def _send_json(self, status: int, obj: dict):
            self._send(status, json.dumps(obj, sort_keys=True).encode(), "application/json")

        def _body(self) -> bytes:
            length = int(self.headers.get("Content-Length", 0))
            return self.rfile.read(length) if length else b""

        def _dispatch(self, method: str):
            from urllib.parse import parse_qs, urlparse

            parsed = urlparse(self.path)
            for verb, pattern, action in _ROUTES:
                if verb != method:
                    continue
                m = pattern.match(parsed.path)
                if not m:
                    continue
                try:
                    if action == "create":
                        result = app.create_session(self._body(), self.headers.get("Content-Type", ""))
                        self._send_json(201, result)
                    elif action == "status":
                        self._send_json(200, app.get_session(m.group("sid")))
                    elif action == "mask":
                        app.put_mask(m.group("sid"), self._body())
                        self._send(204, b"", "application/json")
                    elif action == "alignment":
                        self._send_json(200, app.put_alignment(m.group("sid"), self._body()))
                    elif action == "propagate":
                        self._send_json(200, app.propagate(m.group("sid")))
                    elif action == "preview":
                        kind = parse_qs(parsed.query).get("kind", ["overlay"])[0]
                        data = app.preview(m.group("sid"), int(m.group("frame")), kind)
                        self._send(200, data, "image/png")
                    elif action == "pack":
                        data = app.pack(m.group("sid"))
                        self._send(200, data, "application/zip")
                    return
                except HttpError as err:
                    self._send_json(err.status, err.body)
                    return
                except Exception as err:  # noqa: BLE001
                    self._send_json(500, {"error": f"internal: {err!r}"})
                    return
            self._send_json(404, {"error": f"no route for {method} {parsed.path}"})

        def do_GET(self):
            self._dispatch("GET")

        def do_POST(self):
            self._dispatch("POST")

        def do_PUT(self):
            self._dispatch("PUT")

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", cors_origin)
            self.send_header("Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

    return Handler


def serve(host: str = "127.0.0.1", port: int = 8776, store_dir=None, cors_origin: str = "*"):
    app = EditApp(store_dir=store_dir)
    server = ThreadingHTTPServer((host, port), make_handler(app, cors_origin))
    return server


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="edit3d HTTP service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8776)
    parser.add_argument("--store", default=None, help="optional session persistence directory")
    parser.add_argument("--cors-origin", default="*")
    args = parser.parse_args(argv)
    server = serve(args.host, args.port, args.store, args.cors_origin)
    import sys

    print(f"edit3d service on http://{args.host}:{server.server_address[1]}", file=sys.stderr, flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    import sys

    sys.exit(main())
