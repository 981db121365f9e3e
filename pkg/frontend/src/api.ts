/** Thin typed client for the REST lifecycle endpoints. */

import type { Pose, ViewName } from './protocol.js';

export interface OperatorRef {
  id: number;
}

export interface PhantomInfo {
  id: number;
  seed: number;
  gland_volume_cc: number;
}

export interface CoreRecord {
  id: number;
  pose: Pose;
  p0: [number, number, number];
  p1: [number, number, number];
  in_gland_length: number;
  sector: string | null;
  needle_depth: number;
}

export interface SessionStats {
  n_cores: number;
  n_in_gland: number;
  sector_coverage: number;
  apex_coverage: number;
  boundary_miss_count: number;
  mean_in_gland_length: number | null;
  min_pair_distance: number | null;
  spread_cv: number | null;
}

export interface SceneState {
  probe_frame: number[][];
  needle: { origin: [number, number, number]; direction: [number, number, number] };
  gland: { center: [number, number, number]; semi_axes: [number, number, number]; orientation: number[][] };
  cores: { id: number | null; p0: [number, number, number]; p1: [number, number, number]; sector: string | null }[];
  image_plane: {
    origin: [number, number, number];
    u_axis: [number, number, number];
    v_axis: [number, number, number];
    extent: [number, number];
  };
  pose: Pose;
  exercise_target?: Record<string, unknown>;
}

export interface Recommendation {
  kind: string;
  reason: string;
}

export interface ExerciseResult {
  kind: string;
  passed: boolean;
  score: number;
  detail: Record<string, unknown>;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class Api {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async req<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? undefined : { 'content-type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!res.ok) {
      let detail = res.statusText;
      try {
        detail = (await res.json()).detail ?? detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(res.status, `${method} ${path}: ${detail}`);
    }
    return (await res.json()) as T;
  }

  createOperator(name: string, level: string): Promise<OperatorRef> {
    return this.req('POST', '/operators', { name, level });
  }

  listPhantoms(): Promise<PhantomInfo[]> {
    return this.req('GET', '/phantoms');
  }

  createPhantom(seed: number): Promise<PhantomInfo> {
    return this.req('POST', '/phantoms', { seed });
  }

  openSession(operatorId: number, phantomId: number): Promise<{ id: number }> {
    return this.req('POST', '/sessions', { operator_id: operatorId, phantom_id: phantomId });
  }

  closeSession(sessionId: number): Promise<{ id: number; closed: boolean }> {
    return this.req('POST', `/sessions/${sessionId}/close`);
  }

  fire(sessionId: number, needleDepth: number): Promise<CoreRecord> {
    return this.req('POST', `/sessions/${sessionId}/fire`, { needle_depth: needleDepth });
  }

  stats(sessionId: number): Promise<SessionStats> {
    return this.req('GET', `/sessions/${sessionId}/stats`);
  }

  scene(sessionId: number): Promise<SceneState> {
    return this.req('GET', `/sessions/${sessionId}/scene`);
  }

  startExercise(
    sessionId: number,
    spec: { kind: string; hint_level?: number; target_sector?: string; target_center?: number[]; view?: ViewName },
  ): Promise<Record<string, unknown>> {
    return this.req('POST', `/sessions/${sessionId}/exercise`, spec);
  }

  submitExercise(sessionId: number): Promise<ExerciseResult> {
    return this.req('POST', `/sessions/${sessionId}/exercise/submit`);
  }

  recommendations(operatorId: number): Promise<{ recommendations: Recommendation[] }> {
    return this.req('GET', `/operators/${operatorId}/recommendations`);
  }
}
