/** Statistics and recommendation panel formatting (pure, DOM-free). */

import type { Recommendation, SessionStats } from './api.js';

const mm = (v: number | null): string => (v === null ? '-' : `${v.toFixed(1)} mm`);
const pct = (v: number): string => `${Math.round(v * 100)}%`;

export function formatStats(stats: SessionStats): [string, string][] {
  return [
    ['cores fired', String(stats.n_cores)],
    ['cores in gland', String(stats.n_in_gland)],
    ['sector coverage', pct(stats.sector_coverage)],
    ['apex coverage', pct(stats.apex_coverage)],
    ['boundary misses', String(stats.boundary_miss_count)],
    ['mean core length in gland', mm(stats.mean_in_gland_length)],
    ['closest core pair', mm(stats.min_pair_distance)],
    ['spread CV', stats.spread_cv === null ? '-' : stats.spread_cv.toFixed(2)],
  ];
}

export const SECTOR_COUNT = 12;

export function coverageMeter(stats: SessionStats): { hit: number; total: number } {
  return { hit: Math.round(stats.sector_coverage * SECTOR_COUNT), total: SECTOR_COUNT };
}

const REASON_TEXT: Record<string, string> = {
  'apex-coverage-low': 'apex sectors are being missed',
  'boundary-misses': 'cores keep landing outside the gland',
  'short-cores': 'cores are too shallow in the gland',
  'irregular-spread': 'sampling is unevenly spread',
  'maintain-proficiency': 'keep up the systematic scheme',
};

const KIND_TEXT: Record<string, string> = {
  target_hit: 'Target drill',
  plane_localization: 'Plane localization drill',
  scheme_completion: '12-sector scheme',
};

export function formatRecommendations(recs: Recommendation[]): string[] {
  return recs.map((r) => {
    const kind = KIND_TEXT[r.kind] ?? r.kind;
    const reason = REASON_TEXT[r.reason] ?? r.reason;
    return `${kind} [${r.reason}]: ${reason}`;
  });
}
