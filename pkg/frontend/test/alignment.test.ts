import { describe, expect, it } from 'vitest';

import type { OverlayLine } from '../src/protocol.js';
import { Vec3, vadd, vdot, vscale, vsub } from '../src/scene3d.js';
import { loadFixture } from './helpers.js';

// needle guide reach of the default gun; the server clips the drawn needle
// line to this length before projecting it into the view
const GUN_MAX_REACH_MM = 70;
const RESOLUTION = 512;
const TOLERANCE_PX = 2;

function projectToPlane(
  plane: { origin: number[]; u_axis: number[]; v_axis: number[]; extent: number[] },
  p: Vec3,
): [number, number] {
  const rel = vsub(p, plane.origin as Vec3);
  const s = 0.5 + vdot(rel, plane.u_axis as Vec3) / plane.extent[0];
  const t = vdot(rel, plane.v_axis as Vec3) / plane.extent[1];
  return [s, t];
}

function clipUnitBox(p0: [number, number], p1: [number, number]): [number, number][] | null {
  const [x0, y0] = p0;
  const dx = p1[0] - x0;
  const dy = p1[1] - y0;
  let t0 = 0;
  let t1 = 1;
  const edges: [number, number][] = [
    [-dx, x0],
    [dx, 1 - x0],
    [-dy, y0],
    [dy, 1 - y0],
  ];
  for (const [p, q] of edges) {
    if (p === 0) {
      if (q < 0) {
        return null;
      }
      continue;
    }
    const r = q / p;
    if (p < 0) {
      t0 = Math.max(t0, r);
    } else {
      t1 = Math.min(t1, r);
    }
  }
  if (t0 > t1) {
    return null;
  }
  return [
    [x0 + t0 * dx, y0 + t0 * dy],
    [x0 + t1 * dx, y0 + t1 * dy],
  ];
}

describe('needle overlay alignment', () => {
  it('is within 2 px of the independently projected needle at 512x512', () => {
    const fixture = loadFixture();
    const meta = fixture.needle_frame_meta;
    const scene = fixture.needle_scene;
    expect(meta.w).toBe(RESOLUTION);
    expect(meta.pose).toEqual(scene.pose); // same probe state in both captures

    const needle = meta.overlays.find(
      (o: { style: string; kind: string }) => o.style === 'needle' && o.kind === 'line',
    ) as OverlayLine;
    expect(needle).toBeDefined();

    const origin = scene.needle.origin as Vec3;
    const dir = scene.needle.direction as Vec3;
    const tail = vadd(origin, vscale(dir, GUN_MAX_REACH_MM));
    const clipped = clipUnitBox(
      projectToPlane(scene.image_plane, origin),
      projectToPlane(scene.image_plane, tail),
    );
    expect(clipped).not.toBeNull();
    for (let i = 0; i < 2; i++) {
      const [es, et] = clipped![i];
      const [os, ot] = needle.points[i];
      expect(Math.abs(es - os) * RESOLUTION).toBeLessThanOrEqual(TOLERANCE_PX);
      expect(Math.abs(et - ot) * RESOLUTION).toBeLessThanOrEqual(TOLERANCE_PX);
    }
  });
});
