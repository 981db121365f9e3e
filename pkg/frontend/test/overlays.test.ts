import { describe, expect, it } from 'vitest';

import { MARKER_RADIUS_PX, OVERLAY_COLORS, drawOverlays } from '../src/overlays.js';
import type { Overlay } from '../src/protocol.js';
import { RecordingContext, loadFixture } from './helpers.js';

describe('drawOverlays', () => {
  it('draws the needle as a green line at pixel coordinates', () => {
    const ctx = new RecordingContext();
    const overlays: Overlay[] = [
      { kind: 'line', style: 'needle', points: [[0.25, 0.0], [0.75, 1.0]] },
    ];
    drawOverlays(ctx, overlays, 200, 100);
    expect(ctx.ops('moveTo')[0].args).toEqual([50, 0]);
    expect(ctx.ops('lineTo')[0].args).toEqual([150, 100]);
    expect(ctx.ops('stroke')[0].args).toEqual([OVERLAY_COLORS.needle]);
  });

  it('draws recorded markers red and skips clipped ones', () => {
    const ctx = new RecordingContext();
    const overlays: Overlay[] = [
      { kind: 'marker', style: 'recorded', s: 0.5, t: 0.5, clipped: false },
      { kind: 'marker', style: 'recorded', s: 1.4, t: 0.5, clipped: true },
    ];
    drawOverlays(ctx, overlays, 100, 100);
    const arcs = ctx.ops('arc');
    expect(arcs).toHaveLength(1);
    expect(arcs[0].args.slice(0, 3)).toEqual([50, 50, MARKER_RADIUS_PX]);
    expect(ctx.ops('fill')[0].args).toEqual([OVERLAY_COLORS.recorded]);
  });

  it('renders every overlay style in a real post-fire frame', () => {
    const fixture = loadFixture();
    const frame = fixture.post_fire_frames.find((f: { meta: { view: string } }) => f.meta.view === 'probe');
    const ctx = new RecordingContext();
    drawOverlays(ctx, frame.meta.overlays, frame.meta.w, frame.meta.h);
    const recorded = frame.meta.overlays.filter(
      (o: { style: string; clipped?: boolean }) => o.style === 'recorded' && !o.clipped,
    );
    expect(ctx.ops('arc').length).toBe(recorded.length);
    expect(ctx.ops('stroke').length).toBeGreaterThanOrEqual(1); // the needle line
  });
});
