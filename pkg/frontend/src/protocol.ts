/**
 * Wire protocol shared with the server.
 *
 * Stream frames arrive as a JSON metadata message followed by one binary
 * message: little-endian u32 frame_seq, u8 view code, u16 w, u16 h, then
 * w*h grayscale bytes (row-major).
 */

export type ViewName = 'probe' | 'axial' | 'sagittal' | 'coronal';

export const ALL_VIEWS: ViewName[] = ['probe', 'axial', 'sagittal', 'coronal'];

const VIEW_BY_CODE: ViewName[] = ['probe', 'axial', 'sagittal', 'coronal'];

export const FRAME_HEADER_BYTES = 9;

export interface Pose {
  pitch: number;
  yaw: number;
  roll: number;
  insertion: number;
}

export const ZERO_POSE: Pose = { pitch: 0, yaw: 0, roll: 0, insertion: 0 };

export interface OverlayLine {
  kind: 'line';
  style: string;
  points: [number, number][]; // normalized (s, t) plane coordinates
}

export interface OverlayMarker {
  kind: 'marker';
  style: string;
  s: number;
  t: number;
  clipped: boolean;
  out_of_plane?: number;
  core_id?: number | null;
}

export type Overlay = OverlayLine | OverlayMarker;

export interface FrameMeta {
  type: 'frame';
  session_id: number;
  frame_seq: number;
  view: ViewName;
  w: number;
  h: number;
  pose: Pose;
  overlays: Overlay[];
}

export interface ErrorMsg {
  type: 'error';
  message: string;
}

export type ServerMsg = FrameMeta | ErrorMsg;

export type ClientMsg =
  | { type: 'subscribe'; views: ViewName[]; resolution: [number, number] }
  | ({ type: 'set_pose' } & Pose)
  | { type: 'refresh' };

export interface DecodedFrame {
  frameSeq: number;
  view: ViewName;
  w: number;
  h: number;
  pixels: Uint8Array;
}

export function decodeFramePayload(buf: ArrayBuffer): DecodedFrame {
  if (buf.byteLength < FRAME_HEADER_BYTES) {
    throw new Error(`frame payload too short: ${buf.byteLength} bytes`);
  }
  const dv = new DataView(buf);
  const frameSeq = dv.getUint32(0, true);
  const code = dv.getUint8(4);
  const w = dv.getUint16(5, true);
  const h = dv.getUint16(7, true);
  const view = VIEW_BY_CODE[code];
  if (view === undefined) {
    throw new Error(`unknown view code ${code}`);
  }
  const pixels = new Uint8Array(buf, FRAME_HEADER_BYTES);
  if (pixels.length !== w * h) {
    throw new Error(`payload carries ${pixels.length} pixels, header says ${w}x${h}`);
  }
  return { frameSeq, view, w, h, pixels };
}

/** Expand grayscale bytes to opaque RGBA for a canvas ImageData. */
export function grayToRgba(gray: Uint8Array): Uint8ClampedArray {
  const rgba = new Uint8ClampedArray(gray.length * 4);
  for (let i = 0; i < gray.length; i++) {
    const v = gray[i];
    const o = i * 4;
    rgba[o] = v;
    rgba[o + 1] = v;
    rgba[o + 2] = v;
    rgba[o + 3] = 255;
  }
  return rgba;
}
