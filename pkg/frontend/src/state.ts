/**
 * UI state and its URL form.
 *
 * The whole console state lives in the query string so a search is shareable:
 * copying the address bar reproduces the identical view against the same
 * index. `decodeState(encodeState(s))` is the identity for any in-bounds
 * state; decoding clamps stray values back into the slider bounds and ignores
 * parameters it doesn't know.
 */
import { Variant, VARIANTS } from "./types.js";

export interface UiState {
  q: string;
  variant: Variant;
  topK: number;
  tauS: number;
  tauC: number;
  includeFailed: boolean;
  /** adapter_id whose detail pane is open, if any */
  selection: string | null;
}

export const BOUNDS = {
  tauS: { min: 0, max: 25 },
  tauC: { min: -1, max: 1 },
  topK: { min: 1, max: 100 },
} as const;

export const DEFAULT_STATE: UiState = {
  q: "",
  variant: "suffix",
  topK: 5,
  tauS: 9.8,
  tauC: 0.041,
  includeFailed: false,
  selection: null,
};

export function clamp(value: number, min: number, max: number): number {
  return Math.min(max, Math.max(min, value));
}

function parseNumber(raw: string | null, fallback: number,
                     bounds: { min: number; max: number }, integer = false): number {
  if (raw === null) return fallback;
  const n = Number(raw);
  if (!Number.isFinite(n)) return fallback;
  const v = clamp(n, bounds.min, bounds.max);
  return integer ? Math.round(v) : v;
}

/** Serialize to a query string, leaving defaults out to keep URLs short. */
export function encodeState(state: UiState): string {
  const params = new URLSearchParams();
  if (state.q !== DEFAULT_STATE.q) params.set("q", state.q);
  if (state.variant !== DEFAULT_STATE.variant) params.set("variant", state.variant);
  if (state.topK !== DEFAULT_STATE.topK) params.set("top_k", String(state.topK));
  if (state.tauS !== DEFAULT_STATE.tauS) params.set("tau_s", String(state.tauS));
  if (state.tauC !== DEFAULT_STATE.tauC) params.set("tau_c", String(state.tauC));
  if (state.includeFailed) params.set("include_failed", "1");
  if (state.selection !== null) params.set("sel", state.selection);
  return params.toString();
}

export function decodeState(queryString: string): UiState {
  const params = new URLSearchParams(queryString);
  const variantRaw = params.get("variant");
  const variant = (VARIANTS as readonly string[]).includes(variantRaw ?? "")
    ? (variantRaw as Variant)
    : DEFAULT_STATE.variant;
  return {
    q: params.get("q") ?? DEFAULT_STATE.q,
    variant,
    topK: parseNumber(params.get("top_k"), DEFAULT_STATE.topK, BOUNDS.topK, true),
    tauS: parseNumber(params.get("tau_s"), DEFAULT_STATE.tauS, BOUNDS.tauS),
    tauC: parseNumber(params.get("tau_c"), DEFAULT_STATE.tauC, BOUNDS.tauC),
    includeFailed: params.get("include_failed") === "1",
    selection: params.get("sel"),
  };
}
