/**
 * Wire types for the query service. Field names match the JSON exactly;
 * the console renders these values and never derives new numbers from them.
 */

/** The service serializes non-finite floats as strings to stay valid JSON. */
export type JsonFloat = number | "Infinity" | "-Infinity";

export function fromJsonFloat(x: JsonFloat): number {
  if (x === "Infinity") return Infinity;
  if (x === "-Infinity") return -Infinity;
  return x;
}

export type Variant = "suffix" | "prefix" | "prefix_and_suffix" | "query_only";

export const VARIANTS: readonly Variant[] = [
  "suffix",
  "prefix",
  "prefix_and_suffix",
  "query_only",
];

export interface ResultEntry {
  adapter_id: string;
  score: number | null; // null when the signature direction had zero norm
  strength: number;
  consistency: number;
  passed_filter: boolean;
  fail_reasons: string[];
  zero_direction: boolean;
}

export interface QueryResponse {
  query_text: string;
  variant: string;
  prompt_set_id: string;
  encoder_tag: string;
  index_id: string;
  tau_s: JsonFloat;
  tau_c: JsonFloat;
  top_k: number;
  include_failed: boolean;
  total_ranked: number;
  passed_count: number;
  warning: string | null;
  entries: ResultEntry[];
  timing_ms: number;
}

export interface ScatterPoint {
  adapter_id: string;
  strength: number;
  consistency: number;
  strength_rank: number;
  consistency_rank: number;
  quadrant: string;
  flagged: boolean;
}

export interface ScatterResponse {
  index_id: string;
  tau_s_default: JsonFloat;
  tau_c_default: JsonFloat;
  points: ScatterPoint[];
}

export interface ScreeningResponse {
  index_id: string;
  strength_split: number;
  consistency_split: number;
  disclaimer: string;
  entries: ScatterPoint[];
}

export interface AdapterSummary {
  adapter_id: string;
  strength: number;
  consistency: number;
  sample_count: number;
}

export interface AdaptersPage {
  total: number;
  offset: number;
  limit: number;
  adapters: AdapterSummary[];
}

export interface AdapterDetail extends AdapterSummary {
  dim: number;
  encoder_tag: string;
  direction: number[];
}

export interface HealthResponse {
  status: string;
  index_id: string;
  encoder_tag: string;
  dim: number;
  adapters: number;
  created_at: string;
  manifest: Record<string, number>;
}
