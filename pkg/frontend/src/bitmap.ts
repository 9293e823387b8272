/**
 * Mask bitmap editing: brush/eraser discs, polygon fill, undo history.
 *
 * The bitmap is a flat Uint8Array (0 or 255) so it can be blitted straight
 * into a canvas ImageData alpha channel or encoded as a grayscale PNG.
 * Pixel (x, y) has its center at (x + 0.5, y + 0.5); the polygon fill uses
 * even-odd scanline semantics against those centers.
 */

export interface Point {
  x: number;
  y: number;
}

export class MaskBitmap {
  readonly width: number;
  readonly height: number;
  readonly data: Uint8Array;

  constructor(width: number, height: number, data?: Uint8Array) {
    if (width < 1 || height < 1) {
      throw new Error(`bitmap size must be positive, got ${width}x${height}`);
    }
    this.width = width;
    this.height = height;
    if (data !== undefined && data.length !== width * height) {
      throw new Error(`data length ${data.length} != ${width * height}`);
    }
    this.data = data ? data.slice() : new Uint8Array(width * height);
  }

  clone(): MaskBitmap {
    return new MaskBitmap(this.width, this.height, this.data);
  }

  clear(): void {
    this.data.fill(0);
  }

  get(x: number, y: number): boolean {
    return this.data[y * this.width + x] !== 0;
  }

  count(): number {
    let n = 0;
    for (const v of this.data) if (v !== 0) n += 1;
    return n;
  }

  equals(other: MaskBitmap): boolean {
    if (other.width !== this.width || other.height !== this.height) return false;
    for (let i = 0; i < this.data.length; i++) {
      if ((this.data[i] !== 0) !== (other.data[i] !== 0)) return false;
    }
    return true;
  }

  iou(other: MaskBitmap): number {
    let inter = 0;
    let union = 0;
    for (let i = 0; i < this.data.length; i++) {
      const a = this.data[i] !== 0;
      const b = other.data[i] !== 0;
      if (a && b) inter += 1;
      if (a || b) union += 1;
    }
    return union === 0 ? 1 : inter / union;
  }

  /** Stamp a disc: pixels whose center lies within `radius` of (cx, cy). */
  brush(cx: number, cy: number, radius: number, value = true): void {
    const fill = value ? 255 : 0;
    const x0 = Math.max(0, Math.floor(cx - radius - 1));
    const x1 = Math.min(this.width - 1, Math.ceil(cx + radius));
    const y0 = Math.max(0, Math.floor(cy - radius - 1));
    const y1 = Math.min(this.height - 1, Math.ceil(cy + radius));
    const r2 = radius * radius;
    for (let y = y0; y <= y1; y++) {
      const dy = y + 0.5 - cy;
      for (let x = x0; x <= x1; x++) {
        const dx = x + 0.5 - cx;
        if (dx * dx + dy * dy <= r2) {
          this.data[y * this.width + x] = fill;
        }
      }
    }
  }

  erase(cx: number, cy: number, radius: number): void {
    this.brush(cx, cy, radius, false);
  }

  /** Even-odd scanline fill of a closed polygon (vertices in pixel units). */
  fillPolygon(points: Point[], value = true): void {
    if (points.length < 3) return;
    const fill = value ? 255 : 0;
    let yMin = Infinity;
    let yMax = -Infinity;
    for (const p of points) {
      yMin = Math.min(yMin, p.y);
      yMax = Math.max(yMax, p.y);
    }
    const rowFirst = Math.max(0, Math.ceil(yMin - 0.5));
    const rowLast = Math.min(this.height - 1, Math.floor(yMax - 0.5));
    for (let y = rowFirst; y <= rowLast; y++) {
      const cy = y + 0.5;
      const xs: number[] = [];
      for (let i = 0; i < points.length; i++) {
        const a = points[i];
        const b = points[(i + 1) % points.length];
        // half-open rule [min, max) so shared vertices count once
        if (a.y <= cy === b.y <= cy) continue;
        xs.push(a.x + ((cy - a.y) / (b.y - a.y)) * (b.x - a.x));
      }
      xs.sort((p, q) => p - q);
      for (let k = 0; k + 1 < xs.length; k += 2) {
        const first = Math.max(0, Math.ceil(xs[k] - 0.5));
        const last = Math.min(this.width - 1, Math.ceil(xs[k + 1] - 0.5) - 1);
        for (let x = first; x <= last; x++) {
          this.data[y * this.width + x] = fill;
        }
      }
    }
  }

  fillRect(x0: number, y0: number, x1: number, y1: number, value = true): void {
    this.fillPolygon(
      [
        { x: x0, y: y0 },
        { x: x1, y: y0 },
        { x: x1, y: y1 },
        { x: x0, y: y1 },
      ],
      value,
    );
  }
}

/** Snapshot-based undo: push before each stroke, undo restores the snapshot. */
export class UndoStack {
  private snapshots: Uint8Array[] = [];

  constructor(private readonly limit = 50) {}

  push(bitmap: MaskBitmap): void {
    this.snapshots.push(bitmap.data.slice());
    if (this.snapshots.length > this.limit) {
      this.snapshots.shift();
    }
  }

  get canUndo(): boolean {
    return this.snapshots.length > 0;
  }

  undo(target: MaskBitmap): boolean {
    const snap = this.snapshots.pop();
    if (!snap) return false;
    target.data.set(snap);
    return true;
  }

  clear(): void {
    this.snapshots = [];
  }
}
