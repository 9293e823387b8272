/**
 * Client-side session state: current frame, preview kind, alignment mode and
 * the dirty flags that mark propagated previews stale after local edits.
 * No geometry happens here; every displayed number comes from the service.
 */

import type { AlignmentResult, PreviewKind } from "./api.js";

export type AlignmentMode = { auto: true } | { auto: false; scale: number; shift: number };

export class UiSessionState {
  sessionId: string | null = null;
  frameCount = 0;
  frame = 0;
  kind: PreviewKind = "overlay";
  alignmentMode: AlignmentMode = { auto: true };
  /** last alignment the service reported; display-only */
  alignment: AlignmentResult | null = null;

  private maskApplied = false;
  private alignmentSet = false;
  private propagated = false;
  private maskDirty = false;
  private alignmentDirty = false;

  attach(sessionId: string, frameCount: number): void {
    this.sessionId = sessionId;
    this.frameCount = frameCount;
    this.frame = 0;
    this.maskApplied = false;
    this.alignmentSet = false;
    this.propagated = false;
    this.maskDirty = false;
    this.alignmentDirty = false;
    this.alignment = null;
  }

  setFrame(i: number): number {
    this.frame = Math.min(Math.max(0, i), Math.max(0, this.frameCount - 1));
    return this.frame;
  }

  setKind(kind: PreviewKind): void {
    this.kind = kind;
  }

  /** A local stroke happened; nothing uploaded yet. */
  markMaskEdited(): void {
    this.maskDirty = true;
  }

  /** Mask uploaded to the service; alignment and propagation are stale. */
  markMaskApplied(): void {
    this.maskApplied = true;
    this.maskDirty = false;
    this.alignmentSet = false;
    this.alignment = null;
    this.alignmentDirty = false;
    if (this.propagated) this.alignmentDirty = true; // previews stale until re-propagate
  }

  markAlignmentSet(result: AlignmentResult, mode: AlignmentMode): void {
    this.alignment = result;
    this.alignmentMode = mode;
    this.alignmentSet = true;
    if (this.propagated) this.alignmentDirty = true;
  }

  markPropagated(): void {
    this.propagated = true;
    this.alignmentDirty = false;
    this.maskDirty = false;
  }

  get canAlign(): boolean {
    return this.maskApplied;
  }

  get canPropagate(): boolean {
    return this.maskApplied && this.alignmentSet;
  }

  get hasPreviews(): boolean {
    return this.propagated;
  }

  /** Propagated previews no longer reflect the latest mask/alignment edits. */
  get previewsStale(): boolean {
    return this.propagated && (this.maskDirty || this.alignmentDirty || !this.alignmentSet);
  }
}

/** Format alignment numbers exactly as the panel displays them. */
export function displayAlignment(result: AlignmentResult): {
  scale: string;
  shift: string;
  residual: string;
} {
  return {
    scale: result.scale.toFixed(6),
    shift: result.shift.toFixed(6),
    residual: result.residual_rmse.toExponential(3),
  };
}
