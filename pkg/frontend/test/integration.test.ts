/**
 * End-to-end acceptance against the real Python service:
 *  - a UI-drawn rectangle mask survives upload -> propagate -> frame-1
 *    preview with IoU >= 0.98 and full containment;
 *  - the alignment panel's auto-solve shows exactly what the CLI reports.
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, readdirSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { MaskBitmap } from "../src/bitmap.js";
import { decodePng, encodePng, toGray } from "../src/png.js";
import { displayAlignment } from "../src/state.js";
import { nodeCompression } from "./zlib.js";

const PYTHON = process.env.EDIT3D_PYTHON ?? "python3";

let workDir: string;
let sessionDir: string;
let service: ChildProcess | null = null;
let baseUrl = "";

function synthSession(): void {
  const sceneJson = spawnSync(
    PYTHON,
    ["-c", "from edit3d import synth; print(synth.insertion_scene('orbit', frames=8).to_json())"],
    { encoding: "utf-8" },
  );
  expect(sceneJson.status, sceneJson.stderr).toBe(0);
  const scenePath = join(workDir, "scene.json");
  writeFileSync(scenePath, sceneJson.stdout);
  const synth = spawnSync(
    PYTHON,
    ["-m", "edit3d.cli", "synth", "--spec", scenePath, "--out", sessionDir, "--seed", "3"],
    { encoding: "utf-8" },
  );
  expect(synth.status, synth.stderr).toBe(0);
}

async function startService(): Promise<string> {
  service = spawn(PYTHON, ["-m", "edit3d.service", "--port", "0"], { stdio: ["ignore", "ignore", "pipe"] });
  return new Promise((resolve, reject) => {
    let buffer = "";
    const timer = setTimeout(() => reject(new Error(`service did not start: ${buffer}`)), 30_000);
    service!.stderr!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const m = buffer.match(/on (http:\/\/[\d.]+:\d+)/);
      if (m) {
        clearTimeout(timer);
        resolve(m[1]);
      }
    });
    service!.on("exit", (code) => reject(new Error(`service exited early (${code}): ${buffer}`)));
  });
}

async function uploadSession(api: ApiClient) {
  const form = new FormData();
  const frameDir = join(sessionDir, "frames");
  for (const name of readdirSync(frameDir).sort()) {
    form.append("frames", new Blob([readFileSync(join(frameDir, name))]), name);
  }
  for (const [field, file] of [
    ["cameras", "cameras.json"],
    ["d_ori", "d_ori.pfm"],
    ["edited", "edited.png"],
    ["edited_depth", "edited_depth.pfm"],
    ["session", "session.json"],
  ] as const) {
    form.append(field, new Blob([readFileSync(join(sessionDir, file))]), file);
  }
  return api.createSession(form);
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "edit3d-ui-"));
  sessionDir = join(workDir, "session");
  synthSession();
  baseUrl = await startService();
}, 120_000);

afterAll(() => {
  service?.kill();
});

describe("mask round trip through the live service", () => {
  it("frame-1 preview contains the drawn rectangle with IoU >= 0.98", async () => {
    const api = new ApiClient(baseUrl);
    const info = await uploadSession(api);
    expect(info.frames).toBe(8);

    // draw a rectangle the way the editor does, then serialize to PNG
    const drawn = new MaskBitmap(info.width, info.height);
    drawn.fillRect(40, 30, 88, 66);
    const png = encodePng(
      { width: info.width, height: info.height, channels: 1, data: drawn.data },
      nodeCompression,
    );
    await api.putMask(info.id, png);
    await api.putAlignment(info.id, { auto: true });
    const { frames } = await api.propagate(info.id);
    expect(frames).toBe(8);

    const previewPng = await api.fetchPreview(info.id, 0, "mask");
    const preview = decodePng(previewPng, nodeCompression);
    expect(preview.width).toBe(info.width);
    const previewMask = new MaskBitmap(info.width, info.height, toGray(preview));

    // containment: every drawn pixel survives propagation back to frame 1
    for (let i = 0; i < drawn.data.length; i++) {
      if (drawn.data[i] !== 0) {
        expect(previewMask.data[i]).not.toBe(0);
      }
    }
    expect(previewMask.iou(drawn)).toBeGreaterThanOrEqual(0.98);
  });
});

describe("alignment panel parity with the CLI", () => {
  it("auto-solve displays the same scale/shift/residual the CLI reports", async () => {
    const api = new ApiClient(baseUrl);
    const info = await uploadSession(api);

    const drawn = new MaskBitmap(info.width, info.height);
    drawn.fillRect(44, 32, 84, 64);
    const maskPath = join(workDir, "panel_mask.png");
    writeFileSync(
      maskPath,
      encodePng({ width: info.width, height: info.height, channels: 1, data: drawn.data }, nodeCompression),
    );
    await api.putMask(info.id, readFileSync(maskPath));
    const panel = await api.putAlignment(info.id, { auto: true });

    const alignPath = join(workDir, "align.json");
    const cli = spawnSync(
      PYTHON,
      [
        "-m", "edit3d.cli", "align",
        "--d-hat", join(sessionDir, "edited_depth.pfm"),
        "--d-ori", join(sessionDir, "d_ori.pfm"),
        "--mask", maskPath,
        "--out", alignPath,
      ],
      { encoding: "utf-8" },
    );
    expect(cli.status, cli.stderr).toBe(0);
    const fromCli = JSON.parse(readFileSync(alignPath, "utf-8"));

    const shownPanel = displayAlignment(panel);
    const shownCli = displayAlignment(fromCli);
    expect(shownPanel.scale).toBe(shownCli.scale);
    expect(shownPanel.shift).toBe(shownCli.shift);
    expect(shownPanel.residual).toBe(shownCli.residual);
    expect(panel.pixel_count).toBe(fromCli.pixel_count);
  });
});
