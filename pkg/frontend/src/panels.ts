/** Slice panels: grayscale frame blit plus overlay pass per view. */

import { drawOverlays, Ctx2DLike } from './overlays.js';
import { DecodedFrame, FrameMeta, ViewName, grayToRgba } from './protocol.js';

export interface CanvasLike {
  width: number;
  height: number;
  getContext(kind: '2d'): (Ctx2DLike & { putImageData(img: unknown, x: number, y: number): void }) | null;
}

/** ImageData constructor shim: node test environments have no ImageData. */
export function makeImageData(rgba: Uint8ClampedArray, w: number, h: number): unknown {
  const ctor = (globalThis as Record<string, unknown>).ImageData as
    | (new (data: Uint8ClampedArray, w: number, h: number) => unknown)
    | undefined;
  if (ctor !== undefined) {
    return new ctor(rgba, w, h);
  }
  return { data: rgba, width: w, height: h };
}

export class SlicePanel {
  lastSeq = 0;
  framesRendered = 0;
  lastMeta: FrameMeta | null = null;

  constructor(
    readonly view: ViewName,
    private canvas: CanvasLike,
  ) {}

  render(meta: FrameMeta, frame: DecodedFrame): void {
    if (meta.view !== this.view) {
      throw new Error(`panel ${this.view} got a ${meta.view} frame`);
    }
    if (meta.frame_seq <= this.lastSeq) {
      return; // stale frame (seq is strictly increasing per view)
    }
    const ctx = this.canvas.getContext('2d');
    if (ctx === null) {
      return;
    }
    if (this.canvas.width !== frame.w || this.canvas.height !== frame.h) {
      this.canvas.width = frame.w;
      this.canvas.height = frame.h;
    }
    ctx.putImageData(makeImageData(grayToRgba(frame.pixels), frame.w, frame.h), 0, 0);
    drawOverlays(ctx, meta.overlays, frame.w, frame.h);
    this.lastSeq = meta.frame_seq;
    this.lastMeta = meta;
    this.framesRendered += 1;
  }
}

const LAYOUT_PREFIX = 'trusim.layout.';

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

/** Panel order persists per operator. */
export function saveLayout(storage: StorageLike, operatorId: number, order: ViewName[]): void {
  storage.setItem(LAYOUT_PREFIX + operatorId, JSON.stringify(order));
}

export function loadLayout(storage: StorageLike, operatorId: number, fallback: ViewName[]): ViewName[] {
  const raw = storage.getItem(LAYOUT_PREFIX + operatorId);
  if (raw === null) {
    return [...fallback];
  }
  try {
    const parsed = JSON.parse(raw) as ViewName[];
    if (Array.isArray(parsed) && parsed.length === fallback.length) {
      return parsed;
    }
  } catch {
    /* corrupted layout entry: fall back */
  }
  return [...fallback];
}
