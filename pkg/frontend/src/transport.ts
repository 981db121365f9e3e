/**
 * Per-session frame stream: pairs JSON metadata with the following binary
 * payload, and throttles outgoing poses to the display rate (latest wins,
 * so a fast pointer never floods the socket; the final pose always goes
 * out).
 */

import {
  ClientMsg,
  DecodedFrame,
  FrameMeta,
  Pose,
  ServerMsg,
  ViewName,
  decodeFramePayload,
} from './protocol.js';

/** The subset of the browser WebSocket the client relies on. */
export interface SocketLike {
  binaryType: string;
  readyState: number;
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

/** Schedules a flush at display rate; injectable for tests. */
export type Scheduler = (cb: () => void) => void;

const defaultScheduler: Scheduler = (cb) => {
  if (typeof requestAnimationFrame === 'function') {
    requestAnimationFrame(() => cb());
  } else {
    setTimeout(cb, 16);
  }
};

const defaultFactory: SocketFactory = (url) => new WebSocket(url) as unknown as SocketLike;

export class StreamClient {
  onFrame: ((meta: FrameMeta, frame: DecodedFrame) => void) | null = null;
  onError: ((message: string) => void) | null = null;
  onClose: (() => void) | null = null;

  private socket: SocketLike | null = null;
  private pendingMeta: FrameMeta | null = null;
  private pendingPose: Pose | null = null;
  private flushScheduled = false;
  private scheduler: Scheduler;
  private factory: SocketFactory;

  constructor(
    private url: string,
    opts: { socketFactory?: SocketFactory; scheduler?: Scheduler } = {},
  ) {
    this.scheduler = opts.scheduler ?? defaultScheduler;
    this.factory = opts.socketFactory ?? defaultFactory;
  }

  connect(): Promise<void> {
    return new Promise((resolve, reject) => {
      const socket = this.factory(this.url);
      socket.binaryType = 'arraybuffer';
      socket.onopen = () => resolve();
      socket.onerror = (ev) => reject(ev instanceof Error ? ev : new Error('socket error'));
      socket.onclose = () => this.onClose?.();
      socket.onmessage = (ev) => this.handleMessage(ev.data);
      this.socket = socket;
    });
  }

  private handleMessage(data: unknown): void {
    if (typeof data === 'string') {
      const msg = JSON.parse(data) as ServerMsg;
      if (msg.type === 'frame') {
        this.pendingMeta = msg;
      } else if (msg.type === 'error') {
        this.onError?.(msg.message);
      }
      return;
    }
    if (data instanceof ArrayBuffer) {
      const frame = decodeFramePayload(data);
      const meta = this.pendingMeta;
      this.pendingMeta = null;
      if (meta === null) {
        this.onError?.('binary frame without metadata');
        return;
      }
      if (meta.view !== frame.view || meta.frame_seq !== frame.frameSeq) {
        this.onError?.(`frame metadata mismatch: ${meta.view}#${meta.frame_seq} vs ${frame.view}#${frame.frameSeq}`);
        return;
      }
      this.onFrame?.(meta, frame);
    }
  }

  private sendMsg(msg: ClientMsg): void {
    if (this.socket === null) {
      throw new Error('stream not connected');
    }
    this.socket.send(JSON.stringify(msg));
  }

  subscribe(views: ViewName[], resolution: [number, number]): void {
    this.sendMsg({ type: 'subscribe', views, resolution });
  }

  refresh(): void {
    this.sendMsg({ type: 'refresh' });
  }

  /** Queue a pose; at most one pose message is sent per scheduler tick. */
  setPose(pose: Pose): void {
    this.pendingPose = { ...pose };
    if (this.flushScheduled) {
      return;
    }
    this.flushScheduled = true;
    this.scheduler(() => this.flushPose());
  }

  private flushPose(): void {
    this.flushScheduled = false;
    if (this.pendingPose === null) {
      return;
    }
    const pose = this.pendingPose;
    this.pendingPose = null;
    this.sendMsg({ type: 'set_pose', ...pose });
  }

  close(): void {
    this.socket?.close();
    this.socket = null;
  }
}
