/**
 * Overlay rendering. Overlays arrive as geometry in normalized (s, t)
 * plane coordinates plus a style tag; the style map fixes the clinical
 * color convention: needle trajectory green, recorded biopsies red.
 */

import type { Overlay } from './protocol.js';

export interface Ctx2DLike {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
}

export const OVERLAY_COLORS: Record<string, string> = {
  needle: '#27e065', // green
  recorded: '#ff4141', // red
  target: '#ffc83d',
};

export const MARKER_RADIUS_PX = 4;

export function drawOverlays(ctx: Ctx2DLike, overlays: Overlay[], w: number, h: number): void {
  for (const overlay of overlays) {
    const color = OVERLAY_COLORS[overlay.style] ?? '#9ad0ff';
    if (overlay.kind === 'line') {
      if (overlay.points.length < 2) {
        continue;
      }
      ctx.strokeStyle = color;
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(overlay.points[0][0] * w, overlay.points[0][1] * h);
      for (const [s, t] of overlay.points.slice(1)) {
        ctx.lineTo(s * w, t * h);
      }
      ctx.stroke();
    } else if (overlay.kind === 'marker') {
      if (overlay.clipped) {
        continue; // marker lies outside this view
      }
      ctx.fillStyle = color;
      ctx.beginPath();
      ctx.arc(overlay.s * w, overlay.t * h, MARKER_RADIUS_PX, 0, Math.PI * 2);
      ctx.fill();
    }
  }
}
