/**
 * Probe steering from pointer/wheel input.
 *
 * Drag maps to pitch/yaw about the pivot, modifier-drag to roll, the wheel
 * to insertion. The server clamps poses and echoes the clamped pose in
 * every frame; the controller snaps its state to that echo, which renders
 * the limit as a visual wall (the displayed pose pins at the limit and the
 * affected axis is flagged for edge highlighting).
 */

import { Pose, ZERO_POSE } from './protocol.js';

export interface SteeringGains {
  dragRadPerPx: number;
  rollRadPerPx: number;
  wheelMmPerNotch: number;
}

const DEFAULT_GAINS: SteeringGains = {
  dragRadPerPx: 0.004,
  rollRadPerPx: 0.008,
  wheelMmPerNotch: 1.5,
};

export interface PinnedAxes {
  pitch: boolean;
  yaw: boolean;
  insertion: boolean;
}

export class SteeringController {
  pose: Pose = { ...ZERO_POSE };
  pinned: PinnedAxes = { pitch: false, yaw: false, insertion: false };
  onPoseChange: ((pose: Pose) => void) | null = null;

  private dragging = false;
  private rollMode = false;
  private lastX = 0;
  private lastY = 0;

  constructor(private gains: SteeringGains = DEFAULT_GAINS) {}

  pointerDown(x: number, y: number, rollModifier = false): void {
    this.dragging = true;
    this.rollMode = rollModifier;
    this.lastX = x;
    this.lastY = y;
  }

  pointerMove(x: number, y: number): void {
    if (!this.dragging) {
      return;
    }
    const dx = x - this.lastX;
    const dy = y - this.lastY;
    this.lastX = x;
    this.lastY = y;
    if (this.rollMode) {
      this.pose = { ...this.pose, roll: this.pose.roll + dx * this.gains.rollRadPerPx };
    } else {
      this.pose = {
        ...this.pose,
        yaw: this.pose.yaw + dx * this.gains.dragRadPerPx,
        pitch: this.pose.pitch + dy * this.gains.dragRadPerPx,
      };
    }
    this.emit();
  }

  pointerUp(): void {
    this.dragging = false;
    this.rollMode = false;
  }

  wheel(deltaY: number): void {
    const notches = deltaY / 100;
    this.pose = { ...this.pose, insertion: this.pose.insertion + notches * this.gains.wheelMmPerNotch };
    this.emit();
  }

  setInsertion(value: number): void {
    this.pose = { ...this.pose, insertion: value };
    this.emit();
  }

  setRoll(value: number): void {
    this.pose = { ...this.pose, roll: value };
    this.emit();
  }

  /** Snap to the server-clamped echo; flag axes that hit their wall. */
  applyServerPose(server: Pose): void {
    const eps = 1e-9;
    this.pinned = {
      pitch: Math.abs(server.pitch - this.pose.pitch) > eps,
      yaw: Math.abs(server.yaw - this.pose.yaw) > eps,
      insertion: Math.abs(server.insertion - this.pose.insertion) > eps,
    };
    this.pose = { ...server };
  }

  private emit(): void {
    this.onPoseChange?.({ ...this.pose });
  }
}
