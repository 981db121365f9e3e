/** Shared test doubles: fixture loading, fake sockets, recording contexts. */

import { readFileSync } from 'node:fs';
import { fileURLToPath } from 'node:url';
import path from 'node:path';

import type { FrameMeta } from '../src/protocol.js';
import type { SocketLike } from '../src/transport.js';

const here = path.dirname(fileURLToPath(import.meta.url));

export interface FrameFixture {
  meta: FrameMeta;
  payload_b64: string;
}

// eslint-disable-next-line @typescript-eslint/no-explicit-any
export function loadFixture(): any {
  return JSON.parse(readFileSync(path.join(here, 'fixtures', 'session.json'), 'utf-8'));
}

export function payloadBuffer(fix: FrameFixture): ArrayBuffer {
  const bytes = Buffer.from(fix.payload_b64, 'base64');
  return bytes.buffer.slice(bytes.byteOffset, bytes.byteOffset + bytes.byteLength);
}

/** Scriptable WebSocket double: the test pushes server messages in. */
export class FakeSocket implements SocketLike {
  binaryType = 'blob';
  readyState = 0;
  sent: string[] = [];
  onopen: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;

  open(): void {
    this.readyState = 1;
    this.onopen?.();
  }

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.readyState = 3;
    this.onclose?.();
  }

  pushJson(msg: unknown): void {
    this.onmessage?.({ data: JSON.stringify(msg) });
  }

  pushBinary(buf: ArrayBuffer): void {
    this.onmessage?.({ data: buf });
  }

  sentMessages(): Record<string, unknown>[] {
    return this.sent.map((s) => JSON.parse(s));
  }
}

/** Manual scheduler: flush callbacks run only when the test ticks. */
export class ManualScheduler {
  private queue: (() => void)[] = [];

  schedule = (cb: () => void): void => {
    this.queue.push(cb);
  };

  tick(): void {
    const callbacks = this.queue;
    this.queue = [];
    for (const cb of callbacks) {
      cb();
    }
  }

  get pending(): number {
    return this.queue.length;
  }
}

export interface DrawCall {
  op: string;
  args: unknown[];
}

/** 2D context double that records every call plus current styles. */
export class RecordingContext {
  strokeStyle: string = '';
  fillStyle: string = '';
  lineWidth = 0;
  calls: DrawCall[] = [];

  beginPath(): void {
    this.calls.push({ op: 'beginPath', args: [] });
  }
  moveTo(x: number, y: number): void {
    this.calls.push({ op: 'moveTo', args: [x, y] });
  }
  lineTo(x: number, y: number): void {
    this.calls.push({ op: 'lineTo', args: [x, y] });
  }
  stroke(): void {
    this.calls.push({ op: 'stroke', args: [this.strokeStyle] });
  }
  arc(x: number, y: number, r: number, a0: number, a1: number): void {
    this.calls.push({ op: 'arc', args: [x, y, r, a0, a1] });
  }
  fill(): void {
    this.calls.push({ op: 'fill', args: [this.fillStyle] });
  }
  fillRect(x: number, y: number, w: number, h: number): void {
    this.calls.push({ op: 'fillRect', args: [x, y, w, h] });
  }
  putImageData(img: { width: number; height: number }, x: number, y: number): void {
    this.calls.push({ op: 'putImageData', args: [img.width, img.height, x, y] });
  }

  ops(op: string): DrawCall[] {
    return this.calls.filter((c) => c.op === op);
  }
}

export class FakeCanvas {
  width = 0;
  height = 0;
  ctx = new RecordingContext();

  getContext(_kind: '2d'): RecordingContext {
    return this.ctx;
  }
}

export class MapStorage {
  private map = new Map<string, string>();

  getItem(key: string): string | null {
    return this.map.has(key) ? (this.map.get(key) as string) : null;
  }

  setItem(key: string, value: string): void {
    this.map.set(key, value);
  }
}
