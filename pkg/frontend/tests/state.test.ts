import { describe, expect, it } from "vitest";

import { BOUNDS, decodeState, DEFAULT_STATE, encodeState, UiState } from "../src/state.js";
import { VARIANTS } from "../src/types.js";

/** Deterministic PRNG so failures reproduce. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const TRICKY_QUERIES = [
  "molten glass sculpture",
  "a & b = c + d",
  "100% wool",
  "tab\tand?newline",
  "żółć, наклейка, 絵",
  "trailing space ",
];

describe("URL round-trip", () => {
  it("defaults encode to an empty query string", () => {
    expect(encodeState(DEFAULT_STATE)).toBe("");
    expect(decodeState("")).toEqual(DEFAULT_STATE);
  });

  it("hand-picked states survive encode/decode exactly", () => {
    for (const q of TRICKY_QUERIES) {
      const state: UiState = {
        q,
        variant: "prefix_and_suffix",
        topK: 17,
        tauS: 9.8,
        tauC: -0.25,
        includeFailed: true,
        selection: "lora/with?odd=chars&x",
      };
      expect(decodeState(encodeState(state))).toEqual(state);
    }
  });

  it("300 random in-bounds states round-trip exactly", () => {
    const rand = mulberry32(20260822);
    for (let trial = 0; trial < 300; trial++) {
      const qPool = TRICKY_QUERIES[Math.floor(rand() * TRICKY_QUERIES.length)]!;
      const state: UiState = {
        q: rand() < 0.2 ? "" : qPool + (rand() < 0.5 ? ` #${trial}` : ""),
        variant: VARIANTS[Math.floor(rand() * VARIANTS.length)]!,
        topK: 1 + Math.floor(rand() * BOUNDS.topK.max),
        // raw doubles: String(x) must reproduce them bit-for-bit
        tauS: BOUNDS.tauS.min + rand() * (BOUNDS.tauS.max - BOUNDS.tauS.min),
        tauC: BOUNDS.tauC.min + rand() * (BOUNDS.tauC.max - BOUNDS.tauC.min),
        includeFailed: rand() < 0.5,
        selection: rand() < 0.3 ? null : `adapter-${Math.floor(rand() * 1000)}`,
      };
      expect(decodeState(encodeState(state))).toEqual(state);
    }
  });
});

describe("decoding stray input", () => {
  it("clamps out-of-bounds numbers to the slider bounds", () => {
    expect(decodeState("tau_s=999").tauS).toBe(BOUNDS.tauS.max);
    expect(decodeState("tau_s=-3").tauS).toBe(BOUNDS.tauS.min);
    expect(decodeState("tau_c=2").tauC).toBe(BOUNDS.tauC.max);
    expect(decodeState("top_k=0").topK).toBe(1);
    expect(decodeState("top_k=12345").topK).toBe(BOUNDS.topK.max);
  });

  it("falls back to defaults on unparseable values", () => {
    expect(decodeState("tau_s=wide").tauS).toBe(DEFAULT_STATE.tauS);
    expect(decodeState("top_k=maybe").topK).toBe(DEFAULT_STATE.topK);
    expect(decodeState("tau_c=NaN").tauC).toBe(DEFAULT_STATE.tauC);
    expect(decodeState("variant=bogus").variant).toBe("suffix");
  });

  it("ignores parameters it does not know", () => {
    const state = decodeState("q=hello&utm_source=mail&api=http://x");
    expect(state.q).toBe("hello");
    expect(state).toEqual({ ...DEFAULT_STATE, q: "hello" });
  });
});
