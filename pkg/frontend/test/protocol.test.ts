import { describe, expect, it } from 'vitest';

import { FRAME_HEADER_BYTES, decodeFramePayload, grayToRgba } from '../src/protocol.js';
import { loadFixture, payloadBuffer } from './helpers.js';

function handmadePayload(seq: number, code: number, w: number, h: number): ArrayBuffer {
  const buf = new ArrayBuffer(FRAME_HEADER_BYTES + w * h);
  const dv = new DataView(buf);
  dv.setUint32(0, seq, true);
  dv.setUint8(4, code);
  dv.setUint16(5, w, true);
  dv.setUint16(7, h, true);
  new Uint8Array(buf, FRAME_HEADER_BYTES).fill(77);
  return buf;
}

describe('decodeFramePayload', () => {
  it('decodes real server payloads and matches their metadata', () => {
    const fixture = loadFixture();
    for (const entry of fixture.subscribe_frames) {
      const frame = decodeFramePayload(payloadBuffer(entry));
      expect(frame.view).toBe(entry.meta.view);
      expect(frame.frameSeq).toBe(entry.meta.frame_seq);
      expect(frame.w).toBe(entry.meta.w);
      expect(frame.h).toBe(entry.meta.h);
      expect(frame.pixels.length).toBe(frame.w * frame.h);
    }
  });

  it('decodes a handmade little-endian header', () => {
    const frame = decodeFramePayload(handmadePayload(70000, 2, 3, 4));
    expect(frame.frameSeq).toBe(70000);
    expect(frame.view).toBe('sagittal');
    expect(frame.w).toBe(3);
    expect(frame.h).toBe(4);
    expect([...frame.pixels]).toEqual(new Array(12).fill(77));
  });

  it('rejects unknown view codes', () => {
    expect(() => decodeFramePayload(handmadePayload(1, 9, 2, 2))).toThrow(/view code/);
  });

  it('rejects size mismatches and truncated buffers', () => {
    const buf = handmadePayload(1, 0, 4, 4);
    expect(() => decodeFramePayload(buf.slice(0, buf.byteLength - 3))).toThrow(/pixels/);
    expect(() => decodeFramePayload(new ArrayBuffer(4))).toThrow(/too short/);
  });
});

describe('grayToRgba', () => {
  it('expands gray bytes to opaque RGBA', () => {
    const rgba = grayToRgba(new Uint8Array([0, 128, 255]));
    expect([...rgba]).toEqual([0, 0, 0, 255, 128, 128, 128, 255, 255, 255, 255, 255]);
  });
});
