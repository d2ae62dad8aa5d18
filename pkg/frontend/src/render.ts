/**
 * Pure view models. Everything here is a straight projection of service
 * responses — order is preserved as received and no metric is recomputed;
 * the only local logic is comparing served values against the sliders,
 * with the same strict inequalities the engine uses (pass means
 * strength < tau_s AND consistency > tau_c).
 */
import { QueryResponse, ResultEntry, ScatterPoint } from "./types.js";

export interface ResultRow {
  rank: number;
  adapterId: string;
  scoreText: string;
  strengthText: string;
  consistencyText: string;
  passed: boolean;
  badge: string;
  zeroDirection: boolean;
}

function fmt(x: number, digits: number): string {
  return x.toFixed(digits);
}

/** One row per response entry, in response order — the service owns ranking. */
export function resultRows(response: QueryResponse): ResultRow[] {
  return response.entries.map((e: ResultEntry, i: number) => ({
    rank: i + 1,
    adapterId: e.adapter_id,
    scoreText: e.score === null ? "—" : fmt(e.score, 4),
    strengthText: fmt(e.strength, 3),
    consistencyText: fmt(e.consistency, 4),
    passed: e.passed_filter,
    badge: e.passed_filter ? "pass" : `filtered: ${e.fail_reasons.join(", ")}`,
    zeroDirection: e.zero_direction,
  }));
}

export function summaryLine(response: QueryResponse): string {
  const parts = [
    `${response.passed_count} of ${response.total_ranked} adapters passed`,
    `index ${response.index_id}`,
    `${response.timing_ms} ms`,
  ];
  if (response.warning) parts.push(`warning: ${response.warning}`);
  return parts.join(" · ");
}

export type Region = "passed" | "too_strong" | "inconsistent" | "both";

/**
 * Which side of the current thresholds a point falls on. Used only to shade
 * the scatter while a slider moves, between re-queries; the authoritative
 * pass/fail always comes back from the service.
 */
export function classifyPoint(
  point: { strength: number; consistency: number },
  tauS: number,
  tauC: number,
): Region {
  const tooStrong = !(point.strength < tauS);
  const inconsistent = !(point.consistency > tauC);
  if (tooStrong && inconsistent) return "both";
  if (tooStrong) return "too_strong";
  if (inconsistent) return "inconsistent";
  return "passed";
}

export interface ScatterModel {
  /** plot coordinates are the served percentile ranks, in [0, 1] */
  dots: Array<{
    x: number;
    y: number;
    adapterId: string;
    region: Region;
    flagged: boolean;
  }>;
  regionCounts: Record<Region, number>;
}

export function scatterModel(points: ScatterPoint[], tauS: number, tauC: number): ScatterModel {
  const regionCounts: Record<Region, number> = {
    passed: 0,
    too_strong: 0,
    inconsistent: 0,
    both: 0,
  };
  const dots = points.map((p) => {
    const region = classifyPoint(p, tauS, tauC);
    regionCounts[region] += 1;
    return {
      x: p.strength_rank,
      y: p.consistency_rank,
      adapterId: p.adapter_id,
      region,
      flagged: p.flagged,
    };
  });
  return { dots, regionCounts };
}

/** Adapter ids currently shaded as passing; the monotone set under tau moves. */
export function passingIds(points: ScatterPoint[], tauS: number, tauC: number): Set<string> {
  const ids = new Set<string>();
  for (const p of points) {
    if (classifyPoint(p, tauS, tauC) === "passed") ids.add(p.adapter_id);
  }
  return ids;
}
