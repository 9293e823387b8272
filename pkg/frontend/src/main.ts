/**
 * Browser app wiring: session upload, mask editing on frame 1, alignment
 * tuning with live residual, frame scrubbing over propagated previews, and
 * pack download. All geometry comes from the service; this file only handles
 * canvases and requests.
 */

import { ApiClient, ApiError, type AlignmentResult, type PreviewKind } from "./api.js";
import { MaskBitmap, UndoStack, type Point } from "./bitmap.js";
import { maskToRgba, overlayMask } from "./compositor.js";
import { UiSessionState, displayAlignment } from "./state.js";

type Tool = "brush" | "erase" | "polygon";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const api = new ApiClient(
  (document.querySelector("meta[name=edit3d-service]") as HTMLMetaElement | null)?.content ??
    "http://127.0.0.1:8776",
);
const state = new UiSessionState();

let mask: MaskBitmap | null = null;
const undoStack = new UndoStack();
let tool: Tool = "brush";
let brushSize = 8;
let polygon: Point[] = [];
let frameImage: ImageBitmap | null = null;
const previewCache = new Map<string, ImageData>();

const frameCanvas = $<HTMLCanvasElement>("frame-canvas");
const maskCanvas = $<HTMLCanvasElement>("mask-canvas");
const previewCanvas = $<HTMLCanvasElement>("preview-canvas");
const statusLine = $<HTMLDivElement>("status");
const staleBadge = $<HTMLSpanElement>("stale-badge");

function setStatus(text: string): void {
  statusLine.textContent = text;
}

function reportError(err: unknown): void {
  const detail = err instanceof ApiError ? JSON.stringify(err.body) : String(err);
  setStatus(`error: ${detail}`);
}

// ---------------------------------------------------------------------------
// session upload

function collectUpload(): FormData | null {
  const frames = ($<HTMLInputElement>("in-frames")).files;
  const cameras = ($<HTMLInputElement>("in-cameras")).files?.[0];
  const dOri = ($<HTMLInputElement>("in-dori")).files?.[0];
  const edited = ($<HTMLInputElement>("in-edited")).files?.[0];
  const editedDepth = ($<HTMLInputElement>("in-edited-depth")).files?.[0];
  if (!frames?.length || !cameras || !dOri || !edited || !editedDepth) {
    setStatus("select frames, cameras, depths and the edited image first");
    return null;
  }
  const form = new FormData();
  [...frames]
    .sort((a, b) => a.name.localeCompare(b.name))
    .forEach((f) => form.append("frames", f, f.name));
  form.append("cameras", cameras, "cameras.json");
  form.append("d_ori", dOri, "d_ori.pfm");
  form.append("edited", edited, "edited.png");
  form.append("edited_depth", editedDepth, "edited_depth.pfm");
  const session = ($<HTMLInputElement>("in-session")).files?.[0];
  if (session) form.append("session", session, "session.json");
  return form;
}

async function createSession(): Promise<void> {
  const form = collectUpload();
  if (!form) return;
  const info = await api.createSession(form);
  state.attach(info.id, info.frames);
  mask = new MaskBitmap(info.width, info.height);
  undoStack.clear();
  previewCache.clear();
  for (const canvas of [frameCanvas, maskCanvas, previewCanvas]) {
    canvas.width = info.width;
    canvas.height = info.height;
  }
  const editedFile = ($<HTMLInputElement>("in-edited")).files?.[0];
  if (editedFile) {
    frameImage = await createImageBitmap(editedFile);
    frameCanvas.getContext("2d")!.drawImage(frameImage, 0, 0);
  }
  ($<HTMLInputElement>("scrubber")).max = String(info.frames - 1);
  ($<HTMLInputElement>("scrubber")).value = "0";
  setStatus(`session ${info.id}: ${info.frames} frames at ${info.width}x${info.height}`);
  refreshControls();
}

// ---------------------------------------------------------------------------
// mask editor

function redrawMaskLayer(): void {
  if (!mask) return;
  const ctx = maskCanvas.getContext("2d")!;
  const rgba = maskToRgba(mask.data);
  ctx.putImageData(new ImageData(rgba, mask.width, mask.height), 0, 0);
  if (polygon.length) {
    ctx.strokeStyle = "#ffd43b";
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(polygon[0].x, polygon[0].y);
    for (const p of polygon.slice(1)) ctx.lineTo(p.x, p.y);
    ctx.stroke();
  }
}

function canvasPoint(event: MouseEvent): Point {
  const rect = maskCanvas.getBoundingClientRect();
  return {
    x: ((event.clientX - rect.left) / rect.width) * maskCanvas.width,
    y: ((event.clientY - rect.top) / rect.height) * maskCanvas.height,
  };
}

let stroking = false;

maskCanvas.addEventListener("mousedown", (event) => {
  if (!mask) return;
  const p = canvasPoint(event);
  if (tool === "polygon") {
    polygon.push(p);
    redrawMaskLayer();
    return;
  }
  undoStack.push(mask);
  stroking = true;
  mask.brush(p.x, p.y, brushSize, tool === "brush");
  state.markMaskEdited();
  redrawMaskLayer();
  refreshControls();
});

maskCanvas.addEventListener("mousemove", (event) => {
  if (!stroking || !mask) return;
  const p = canvasPoint(event);
  mask.brush(p.x, p.y, brushSize, tool === "brush");
  redrawMaskLayer();
});

window.addEventListener("mouseup", () => {
  stroking = false;
});

maskCanvas.addEventListener("dblclick", () => {
  if (!mask || tool !== "polygon" || polygon.length < 3) return;
  undoStack.push(mask);
  mask.fillPolygon(polygon);
  polygon = [];
  state.markMaskEdited();
  redrawMaskLayer();
  refreshControls();
});

function maskToBlob(): Promise<Blob> {
  const m = mask!;
  const scratch = document.createElement("canvas");
  scratch.width = m.width;
  scratch.height = m.height;
  const rgba = new Uint8ClampedArray(m.width * m.height * 4);
  for (let i = 0; i < m.data.length; i++) {
    const v = m.data[i] !== 0 ? 255 : 0;
    rgba.set([v, v, v, 255], i * 4);
  }
  scratch.getContext("2d")!.putImageData(new ImageData(rgba, m.width, m.height), 0, 0);
  return new Promise((resolve, reject) =>
    scratch.toBlob((b) => (b ? resolve(b) : reject(new Error("mask encode failed"))), "image/png"),
  );
}

async function applyMask(): Promise<void> {
  if (!mask || !state.sessionId) return;
  await api.putMask(state.sessionId, await maskToBlob());
  state.markMaskApplied();
  previewCache.clear();
  setStatus(`mask applied (${mask.count()} px)`);
  refreshControls();
}

// ---------------------------------------------------------------------------
// alignment panel

function renderAlignment(result: AlignmentResult): void {
  const shown = displayAlignment(result);
  ($<HTMLInputElement>("align-scale")).value = shown.scale;
  ($<HTMLInputElement>("align-shift")).value = shown.shift;
  ($<HTMLInputElement>("align-scale-slider")).value = String(result.scale);
  ($<HTMLInputElement>("align-shift-slider")).value = String(result.shift);
  $<HTMLSpanElement>("align-residual").textContent =
    `residual ${shown.residual} over ${result.pixel_count} px`;
}

async function solveAuto(): Promise<void> {
  if (!state.sessionId) return;
  const result = await api.putAlignment(state.sessionId, { auto: true });
  state.markAlignmentSet(result, { auto: true });
  renderAlignment(result);
  setStatus("alignment solved");
  refreshControls();
}

async function applyManual(scale: number, shift: number): Promise<void> {
  if (!state.sessionId || !Number.isFinite(scale) || scale === 0) return;
  const result = await api.putAlignment(state.sessionId, { scale, shift });
  state.markAlignmentSet(result, { auto: false, scale, shift });
  renderAlignment(result);
  refreshControls();
}

// ---------------------------------------------------------------------------
// previews

async function fetchPreviewImage(frame: number, kind: PreviewKind): Promise<ImageData> {
  const key = `${frame}:${kind}`;
  const cached = previewCache.get(key);
  if (cached) return cached;
  const bytes = await api.fetchPreview(state.sessionId!, frame, kind);
  const bitmap = await createImageBitmap(new Blob([bytes.buffer as ArrayBuffer], { type: "image/png" }));
  const scratch = document.createElement("canvas");
  scratch.width = bitmap.width;
  scratch.height = bitmap.height;
  const ctx = scratch.getContext("2d")!;
  ctx.drawImage(bitmap, 0, 0);
  const data = ctx.getImageData(0, 0, bitmap.width, bitmap.height);
  previewCache.set(key, data);
  return data;
}

async function refreshPreview(): Promise<void> {
  if (!state.hasPreviews || !state.sessionId) return;
  const ctx = previewCanvas.getContext("2d")!;
  if (state.kind === "overlay") {
    // composited locally: masked original + 50% tint from the mask preview
    const base = await fetchPreviewImage(state.frame, "masked");
    const maskImg = await fetchPreviewImage(state.frame, "mask");
    const gray = new Uint8Array(maskImg.width * maskImg.height);
    for (let i = 0; i < gray.length; i++) gray[i] = maskImg.data[i * 4];
    const blended = overlayMask(new Uint8ClampedArray(base.data), gray);
    ctx.putImageData(new ImageData(blended, base.width, base.height), 0, 0);
  } else {
    const img = await fetchPreviewImage(state.frame, state.kind);
    ctx.putImageData(img, 0, 0);
  }
  $<HTMLSpanElement>("frame-label").textContent =
    `frame ${state.frame + 1} / ${state.frameCount} (${state.kind})`;
}

async function propagate(): Promise<void> {
  if (!state.sessionId) return;
  setStatus("propagating...");
  setBusy(true);
  try {
    const { frames } = await api.propagate(state.sessionId);
    state.markPropagated();
    previewCache.clear();
    setStatus(`propagated ${frames} masks`);
    await refreshPreview();
  } finally {
    setBusy(false);
    refreshControls();
  }
}

// ---------------------------------------------------------------------------
// control wiring

function setBusy(busy: boolean): void {
  for (const id of ["btn-propagate", "btn-apply-mask", "btn-auto"]) {
    ($<HTMLButtonElement>(id)).disabled = busy;
  }
}

function refreshControls(): void {
  ($<HTMLButtonElement>("btn-undo")).disabled = !undoStack.canUndo;
  ($<HTMLButtonElement>("btn-auto")).disabled = !state.canAlign;
  ($<HTMLButtonElement>("btn-propagate")).disabled = !state.canPropagate;
  staleBadge.style.display = state.previewsStale ? "inline" : "none";
  const pack = $<HTMLAnchorElement>("pack-link");
  if (state.hasPreviews && state.sessionId) {
    pack.href = api.packUrl(state.sessionId);
    pack.style.display = "inline";
  } else {
    pack.style.display = "none";
  }
}

function bind(): void {
  $<HTMLButtonElement>("btn-create").addEventListener("click", () => createSession().catch(reportError));
  $<HTMLButtonElement>("btn-apply-mask").addEventListener("click", () => applyMask().catch(reportError));
  $<HTMLButtonElement>("btn-undo").addEventListener("click", () => {
    if (mask && undoStack.undo(mask)) {
      state.markMaskEdited();
      redrawMaskLayer();
      refreshControls();
    }
  });
  $<HTMLButtonElement>("btn-clear").addEventListener("click", () => {
    if (!mask) return;
    undoStack.push(mask);
    mask.clear();
    polygon = [];
    state.markMaskEdited();
    redrawMaskLayer();
    refreshControls();
  });
  for (const t of ["brush", "erase", "polygon"] as Tool[]) {
    $<HTMLInputElement>(`tool-${t}`).addEventListener("change", () => {
      tool = t;
      polygon = [];
    });
  }
  $<HTMLInputElement>("brush-size").addEventListener("input", (e) => {
    brushSize = Number((e.target as HTMLInputElement).value);
  });
  $<HTMLButtonElement>("btn-auto").addEventListener("click", () => solveAuto().catch(reportError));
  const manual = () =>
    applyManual(
      Number(($<HTMLInputElement>("align-scale")).value),
      Number(($<HTMLInputElement>("align-shift")).value),
    ).catch(reportError);
  $<HTMLInputElement>("align-scale").addEventListener("change", manual);
  $<HTMLInputElement>("align-shift").addEventListener("change", manual);
  const manualFromSliders = () => {
    ($<HTMLInputElement>("align-scale")).value = ($<HTMLInputElement>("align-scale-slider")).value;
    ($<HTMLInputElement>("align-shift")).value = ($<HTMLInputElement>("align-shift-slider")).value;
    manual();
  };
  $<HTMLInputElement>("align-scale-slider").addEventListener("change", manualFromSliders);
  $<HTMLInputElement>("align-shift-slider").addEventListener("change", manualFromSliders);
  $<HTMLButtonElement>("btn-propagate").addEventListener("click", () => propagate().catch(reportError));
  $<HTMLInputElement>("scrubber").addEventListener("input", (e) => {
    state.setFrame(Number((e.target as HTMLInputElement).value));
    refreshPreview().catch(reportError);
  });
  for (const kind of ["pcr", "mask", "overlay", "masked"] as PreviewKind[]) {
    $<HTMLInputElement>(`kind-${kind}`).addEventListener("change", () => {
      state.setKind(kind);
      refreshPreview().catch(reportError);
    });
  }
  refreshControls();
}

bind();
setStatus("upload a session to begin");
