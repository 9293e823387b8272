/**
 * Client-side preview compositing: tint the frame where the mask is set so
 * one propagation serves every overlay mode without re-fetching geometry.
 */

export interface Rgb {
  r: number;
  g: number;
  b: number;
}

export const MASK_TINT: Rgb = { r: 255, g: 48, b: 48 };

/**
 * Blend `tint` into `frameRgba` at `alpha` wherever `maskGray` is nonzero.
 * Arrays are canvas-style RGBA and row-major grayscale of the same raster.
 */
export function overlayMask(
  frameRgba: Uint8ClampedArray,
  maskGray: Uint8Array,
  tint: Rgb = MASK_TINT,
  alpha = 0.5,
): Uint8ClampedArray<ArrayBuffer> {
  if (frameRgba.length !== maskGray.length * 4) {
    throw new Error(`rgba length ${frameRgba.length} != 4 * ${maskGray.length}`);
  }
  const out = new Uint8ClampedArray(frameRgba);
  for (let i = 0; i < maskGray.length; i++) {
    if (maskGray[i] === 0) continue;
    const o = i * 4;
    out[o] = (1 - alpha) * frameRgba[o] + alpha * tint.r;
    out[o + 1] = (1 - alpha) * frameRgba[o + 1] + alpha * tint.g;
    out[o + 2] = (1 - alpha) * frameRgba[o + 2] + alpha * tint.b;
    out[o + 3] = 255;
  }
  return out;
}

/** Render a mask bitmap into RGBA for a semi-transparent editing layer. */
export function maskToRgba(
  maskGray: Uint8Array,
  tint: Rgb = MASK_TINT,
  alpha = 0.5,
): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(maskGray.length * 4);
  const a = Math.round(alpha * 255);
  for (let i = 0; i < maskGray.length; i++) {
    if (maskGray[i] === 0) continue;
    const o = i * 4;
    out[o] = tint.r;
    out[o + 1] = tint.g;
    out[o + 2] = tint.b;
    out[o + 3] = a;
  }
  return out;
}
