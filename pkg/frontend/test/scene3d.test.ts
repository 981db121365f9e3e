import { describe, expect, it } from 'vitest';

import {
  OrbitCamera,
  drawScene,
  planeCoords,
  planeQuad,
  scenePolylines,
  vnorm,
  vsub,
  Vec3,
} from '../src/scene3d.js';
import { RecordingContext, loadFixture } from './helpers.js';

const scene = loadFixture().needle_scene;

describe('scene geometry', () => {
  it('plane quad contains the probe tip', () => {
    const frame = scene.probe_frame;
    const tip: Vec3 = [frame[0][3], frame[1][3], frame[2][3]];
    const { a, b } = planeCoords(scene.image_plane, tip);
    const [w, d] = scene.image_plane.extent;
    expect(Math.abs(a)).toBeLessThanOrEqual(w / 2 + 1e-9);
    expect(b).toBeGreaterThanOrEqual(-1e-9);
    expect(b).toBeLessThanOrEqual(d + 1e-9);
    const corners = planeQuad(scene.image_plane);
    expect(corners).toHaveLength(4);
    // corners span the full extent
    expect(vnorm(vsub(corners[1], corners[0]))).toBeCloseTo(w, 6);
    expect(vnorm(vsub(corners[3], corners[0]))).toBeCloseTo(d, 6);
  });

  it('fired cores appear as segments of the gun core length in scene units', () => {
    const fixture = loadFixture();
    const fired = fixture.steps.map((s: { fire_response: unknown }) => s.fire_response) as {
      p0: Vec3;
      p1: Vec3;
    }[];
    expect(fired).toHaveLength(12);
    for (const core of fired) {
      expect(vnorm(vsub(core.p1, core.p0))).toBeCloseTo(17.0, 6);
    }
  });

  it('includes gland rings, probe, needle, cores, and the plane quad', () => {
    const withCores = { ...scene, cores: loadFixture().steps.map((s: { fire_response: unknown }) => s.fire_response) };
    const lines = scenePolylines(withCores, 0);
    // 3 gland rings + probe + needle + 12 cores + plane quad
    expect(lines).toHaveLength(3 + 1 + 1 + 12 + 1);
  });

  it('shows the target rings only at hint level 2', () => {
    const withTarget = {
      ...scene,
      exercise_target: { kind: 'target_hit', target_center: [40, 40, 40], target_radius: 5 },
    };
    const base = scenePolylines(scene, 2).length;
    expect(scenePolylines(withTarget, 2).length).toBe(base + 3);
    expect(scenePolylines(withTarget, 1).length).toBe(base);
  });
});

describe('OrbitCamera', () => {
  it('projects the orbit target to the viewport center', () => {
    const cam = new OrbitCamera([40, 40, 40], 200, 0.7, 0.3);
    const pt = cam.project([40, 40, 40], { w: 640, h: 480 });
    expect(pt).not.toBeNull();
    expect(pt!.x).toBeCloseTo(320, 6);
    expect(pt!.y).toBeCloseTo(240, 6);
  });

  it('culls points behind the camera', () => {
    const cam = new OrbitCamera([0, 0, 0], 100, 0, 0);
    const { eye, forward } = cam.axes();
    const behind: Vec3 = [eye[0] - forward[0] * 10, eye[1] - forward[1] * 10, eye[2] - forward[2] * 10];
    expect(cam.project(behind, { w: 100, h: 100 })).toBeNull();
  });

  it('orbit and zoom stay within bounds and leave the scene untouched', () => {
    const cam = new OrbitCamera([0, 0, 0], 100);
    const before = JSON.stringify(scene);
    cam.orbit(0.5, 10); // elevation capped
    expect(cam.elevation).toBeLessThan(Math.PI / 2);
    cam.zoom(1e-9);
    expect(cam.distance).toBeGreaterThanOrEqual(10);
    expect(JSON.stringify(scene)).toBe(before);
  });
});

describe('drawScene', () => {
  it('strokes one polyline per scene element', () => {
    const ctx = new RecordingContext();
    const cam = new OrbitCamera([40, 40, 40], 260, 0.6, 0.35);
    const drawn = drawScene(ctx, scene, cam, { w: 420, h: 360 });
    expect(drawn).toBe(scenePolylines(scene).length);
    expect(ctx.ops('stroke')).toHaveLength(drawn);
  });
});
