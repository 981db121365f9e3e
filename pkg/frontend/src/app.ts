/**
 * Session orchestration: lifecycle calls, stream wiring, steering, firing,
 * exercises, statistics. DOM-free; the browser entry point (main.ts) wires
 * real elements and input events around it.
 *
 * The UI is stateless with respect to truth: everything shown is rebuilt
 * from server responses (frames, stats, scene), so a reconnect reconstructs
 * the exact scene.
 */

import { Api, Recommendation, SessionStats } from './api.js';
import { SlicePanel, StorageLike, loadLayout, saveLayout } from './panels.js';
import { ALL_VIEWS, DecodedFrame, FrameMeta, Pose, ViewName } from './protocol.js';
import { SteeringController } from './steering.js';
import { StreamClient } from './transport.js';

export interface AppHooks {
  onStats?: (stats: SessionStats) => void;
  onRecommendations?: (recs: Recommendation[]) => void;
  onPercussion?: () => void;
  onError?: (message: string) => void;
  onExerciseResult?: (result: { passed: boolean; score: number }) => void;
}

export interface AppConfig {
  api: Api;
  makeStream: (sessionId: number) => StreamClient;
  panels: Map<ViewName, SlicePanel>;
  steering: SteeringController;
  resolution?: [number, number];
  views?: ViewName[];
  storage?: StorageLike;
  hooks?: AppHooks;
}

export class TrainerApp {
  operatorId: number | null = null;
  sessionId: number | null = null;
  phantomId: number | null = null;
  stream: StreamClient | null = null;
  needleDepth = 20;

  private readonly views: ViewName[];
  private readonly resolution: [number, number];
  private readonly hooks: AppHooks;

  constructor(private cfg: AppConfig) {
    this.views = cfg.views ?? [...ALL_VIEWS];
    this.resolution = cfg.resolution ?? [512, 512];
    this.hooks = cfg.hooks ?? {};
  }

  async start(operatorName: string, level = 'novice'): Promise<void> {
    const api = this.cfg.api;
    this.operatorId = (await api.createOperator(operatorName, level)).id;
    const phantoms = await api.listPhantoms();
    this.phantomId = phantoms.length > 0 ? phantoms[0].id : (await api.createPhantom(0)).id;
    this.sessionId = (await api.openSession(this.operatorId, this.phantomId)).id;

    const stream = this.cfg.makeStream(this.sessionId);
    stream.onFrame = (meta, frame) => this.handleFrame(meta, frame);
    stream.onError = (message) => this.hooks.onError?.(message);
    await stream.connect();
    stream.subscribe(this.views, this.resolution);
    this.cfg.steering.onPoseChange = (pose: Pose) => stream.setPose(pose);
    this.stream = stream;
    await this.refreshStats();
  }

  handleFrame(meta: FrameMeta, frame: DecodedFrame): void {
    const panel = this.cfg.panels.get(meta.view);
    panel?.render(meta, frame);
    if (meta.view === 'probe') {
      // the echoed pose is the server-clamped truth: renders limit walls
      this.cfg.steering.applyServerPose(meta.pose);
    }
  }

  async fire(): Promise<void> {
    if (this.sessionId === null || this.stream === null) {
      throw new Error('no active session');
    }
    await this.cfg.api.fire(this.sessionId, this.needleDepth);
    this.hooks.onPercussion?.();
    this.stream.refresh(); // all views pick up the new recorded marker
    await this.refreshStats();
  }

  async refreshStats(): Promise<void> {
    if (this.sessionId === null || this.operatorId === null) {
      return;
    }
    this.hooks.onStats?.(await this.cfg.api.stats(this.sessionId));
    this.hooks.onRecommendations?.((await this.cfg.api.recommendations(this.operatorId)).recommendations);
  }

  async startExercise(kind: string, hintLevel?: number): Promise<void> {
    if (this.sessionId === null) {
      throw new Error('no active session');
    }
    await this.cfg.api.startExercise(this.sessionId, { kind, hint_level: hintLevel });
    this.stream?.refresh();
  }

  async submitExercise(): Promise<{ passed: boolean; score: number }> {
    if (this.sessionId === null) {
      throw new Error('no active session');
    }
    const result = await this.cfg.api.submitExercise(this.sessionId);
    this.hooks.onExerciseResult?.(result);
    await this.refreshStats();
    return result;
  }

  panelLayout(): ViewName[] {
    if (this.cfg.storage === undefined || this.operatorId === null) {
      return [...this.views];
    }
    return loadLayout(this.cfg.storage, this.operatorId, this.views);
  }

  savePanelLayout(order: ViewName[]): void {
    if (this.cfg.storage !== undefined && this.operatorId !== null) {
      saveLayout(this.cfg.storage, this.operatorId, order);
    }
  }
}
