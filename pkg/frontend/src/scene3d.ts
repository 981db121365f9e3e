/**
 * Minimal 3D wireframe view: orbit camera plus perspective projection onto
 * a 2D canvas. The scene shows the gland ellipsoid, the probe body and
 * needle ray, recorded cores, the current image-plane quad, and (at hint
 * level 2) the exercise target. Camera motion is independent of the probe
 * pose.
 */

import type { SceneState } from './api.js';
import type { Ctx2DLike } from './overlays.js';

export type Vec3 = [number, number, number];

export const vsub = (a: Vec3, b: Vec3): Vec3 => [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
export const vadd = (a: Vec3, b: Vec3): Vec3 => [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
export const vscale = (a: Vec3, s: number): Vec3 => [a[0] * s, a[1] * s, a[2] * s];
export const vdot = (a: Vec3, b: Vec3): number => a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
export const vcross = (a: Vec3, b: Vec3): Vec3 => [
  a[1] * b[2] - a[2] * b[1],
  a[2] * b[0] - a[0] * b[2],
  a[0] * b[1] - a[1] * b[0],
];
export const vnorm = (a: Vec3): number => Math.sqrt(vdot(a, a));
export const vunit = (a: Vec3): Vec3 => vscale(a, 1 / vnorm(a));

export interface Viewport {
  w: number;
  h: number;
}

export class OrbitCamera {
  constructor(
    public target: Vec3,
    public distance: number,
    public azimuth = 0.6,
    public elevation = 0.35,
    public fovY = Math.PI / 4,
  ) {}

  orbit(dAzimuth: number, dElevation: number): void {
    this.azimuth += dAzimuth;
    const cap = Math.PI / 2 - 0.01;
    this.elevation = Math.min(cap, Math.max(-cap, this.elevation + dElevation));
  }

  zoom(factor: number): void {
    this.distance = Math.min(2000, Math.max(10, this.distance * factor));
  }

  axes(): { right: Vec3; up: Vec3; forward: Vec3; eye: Vec3 } {
    const ca = Math.cos(this.azimuth);
    const sa = Math.sin(this.azimuth);
    const ce = Math.cos(this.elevation);
    const se = Math.sin(this.elevation);
    // eye on the orbit sphere around the target
    const offset: Vec3 = [this.distance * ce * sa, this.distance * se, this.distance * ce * ca];
    const eye = vadd(this.target, offset);
    const forward = vunit(vsub(this.target, eye));
    const right = vunit(vcross(forward, [0, 1, 0]));
    const up = vcross(right, forward);
    return { right, up, forward, eye };
  }

  /** Project a world point; null when behind the camera. */
  project(p: Vec3, viewport: Viewport): { x: number; y: number; depth: number } | null {
    const { right, up, forward, eye } = this.axes();
    const rel = vsub(p, eye);
    const depth = vdot(rel, forward);
    if (depth <= 1e-6) {
      return null;
    }
    const fy = viewport.h / 2 / Math.tan(this.fovY / 2);
    const x = viewport.w / 2 + (vdot(rel, right) / depth) * fy;
    const y = viewport.h / 2 - (vdot(rel, up) / depth) * fy;
    return { x, y, depth };
  }
}

/** Three principal rings of the (oriented) gland ellipsoid. */
export function ellipsoidWireframe(
  center: Vec3,
  semiAxes: Vec3,
  orientation: number[][],
  segments = 48,
): Vec3[][] {
  const toWorld = (q: Vec3): Vec3 => {
    const scaled: Vec3 = [q[0] * semiAxes[0], q[1] * semiAxes[1], q[2] * semiAxes[2]];
    return [
      center[0] + orientation[0][0] * scaled[0] + orientation[0][1] * scaled[1] + orientation[0][2] * scaled[2],
      center[1] + orientation[1][0] * scaled[0] + orientation[1][1] * scaled[1] + orientation[1][2] * scaled[2],
      center[2] + orientation[2][0] * scaled[0] + orientation[2][1] * scaled[1] + orientation[2][2] * scaled[2],
    ];
  };
  const rings: Vec3[][] = [];
  const planes: ((c: number, s: number) => Vec3)[] = [
    (c, s) => [c, s, 0],
    (c, s) => [0, c, s],
    (c, s) => [c, 0, s],
  ];
  for (const make of planes) {
    const ring: Vec3[] = [];
    for (let i = 0; i <= segments; i++) {
      const a = (i / segments) * Math.PI * 2;
      ring.push(toWorld(make(Math.cos(a), Math.sin(a))));
    }
    rings.push(ring);
  }
  return rings;
}

/** Corners of the current image plane: (s, t) in {0,1}^2. */
export function planeQuad(plane: SceneState['image_plane']): Vec3[] {
  const [w, d] = plane.extent;
  const o = plane.origin as Vec3;
  const u = plane.u_axis as Vec3;
  const v = plane.v_axis as Vec3;
  const corner = (s: number, t: number): Vec3 => vadd(vadd(o, vscale(u, (s - 0.5) * w)), vscale(v, t * d));
  return [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
}

/** (a, b) such that p = origin + a*u + b*v; for points on the plane. */
export function planeCoords(plane: SceneState['image_plane'], p: Vec3): { a: number; b: number } {
  const rel = vsub(p, plane.origin as Vec3);
  return { a: vdot(rel, plane.u_axis as Vec3), b: vdot(rel, plane.v_axis as Vec3) };
}

export const SCENE_COLORS = {
  gland: '#7f8ea3',
  probe: '#d9e2ec',
  needle: '#27e065',
  core: '#ff4141',
  plane: '#4f9cf7',
  target: '#ffc83d',
};

const PROBE_BODY_MM = 90;
const NEEDLE_DRAW_MM = 70;

export interface ScenePolyline {
  color: string;
  points: Vec3[];
  closed?: boolean;
}

/** Assemble all polylines before projection: easy to test, easy to draw. */
export function scenePolylines(scene: SceneState, hintLevel = 0): ScenePolyline[] {
  const lines: ScenePolyline[] = [];
  for (const ring of ellipsoidWireframe(
    scene.gland.center as Vec3,
    scene.gland.semi_axes as Vec3,
    scene.gland.orientation,
  )) {
    lines.push({ color: SCENE_COLORS.gland, points: ring });
  }
  const frame = scene.probe_frame;
  const tip: Vec3 = [frame[0][3], frame[1][3], frame[2][3]];
  const zAxis: Vec3 = [frame[0][2], frame[1][2], frame[2][2]];
  lines.push({ color: SCENE_COLORS.probe, points: [vsub(tip, vscale(zAxis, PROBE_BODY_MM)), tip] });
  const needleOrigin = scene.needle.origin as Vec3;
  const needleDir = scene.needle.direction as Vec3;
  lines.push({
    color: SCENE_COLORS.needle,
    points: [needleOrigin, vadd(needleOrigin, vscale(needleDir, NEEDLE_DRAW_MM))],
  });
  for (const core of scene.cores) {
    lines.push({ color: SCENE_COLORS.core, points: [core.p0 as Vec3, core.p1 as Vec3] });
  }
  lines.push({ color: SCENE_COLORS.plane, points: planeQuad(scene.image_plane), closed: true });
  const target = scene.exercise_target;
  if (hintLevel >= 2 && target !== undefined && Array.isArray(target.target_center)) {
    const c = target.target_center as Vec3;
    const r = typeof target.target_radius === 'number' ? target.target_radius : 5;
    for (const ring of ellipsoidWireframe(c, [r, r, r], [[1, 0, 0], [0, 1, 0], [0, 0, 1]], 24)) {
      lines.push({ color: SCENE_COLORS.target, points: ring });
    }
  }
  return lines;
}

export function drawScene(ctx: Ctx2DLike, scene: SceneState, cam: OrbitCamera, viewport: Viewport, hintLevel = 0): number {
  let drawn = 0;
  for (const line of scenePolylines(scene, hintLevel)) {
    const projected = line.points.map((p) => cam.project(p, viewport));
    ctx.strokeStyle = line.color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    let started = false;
    for (const pt of projected) {
      if (pt === null) {
        started = false;
        continue;
      }
      if (!started) {
        ctx.moveTo(pt.x, pt.y);
        started = true;
      } else {
        ctx.lineTo(pt.x, pt.y);
      }
    }
    if (line.closed && projected[0] !== null && started) {
      ctx.lineTo(projected[0].x, projected[0].y);
    }
    ctx.stroke();
    drawn += 1;
  }
  return drawn;
}
