/**
 * Integration against a real service instance, when one can be started:
 * requires the `loradex` CLI on PATH and the engine repo's golden fixtures
 * one directory up. Skipped cleanly anywhere else.
 */
import { execSync, spawn, ChildProcess } from "node:child_process";
import { existsSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { resultRows } from "../src/render.js";

const FIXTURES = fileURLToPath(new URL("../../tests/fixtures", import.meta.url));
const PORT = 8791;
const QUERY = "molten glass sculpture"; // the one text the fixture cache can embed

function cliAvailable(): boolean {
  try {
    execSync("loradex --version", { stdio: "ignore" });
    return true;
  } catch {
    return false;
  }
}

const canRun = cliAvailable() && existsSync(`${FIXTURES}/index.ldxi`);

describe.skipIf(!canRun)("against a live service", () => {
  let child: ChildProcess;
  const api = new ApiClient(`http://127.0.0.1:${PORT}`);

  beforeAll(async () => {
    child = spawn(
      "loradex",
      [
        "serve",
        "--index", `${FIXTURES}/index.ldxi`,
        "--provider", `${FIXTURES}/query_cache.jsonl`,
        "--prompts", `${FIXTURES}/prompts_retrieval.tsv`,
        "--listen", `127.0.0.1:${PORT}`,
      ],
      { stdio: "ignore" },
    );
    const deadline = Date.now() + 15_000;
    for (;;) {
      try {
        await api.health();
        return;
      } catch {
        if (Date.now() > deadline) throw new Error("service did not come up");
        await new Promise((r) => setTimeout(r, 150));
      }
    }
  }, 20_000);

  afterAll(() => {
    child?.kill();
  });

  it("renders exactly the service's ordered entries", async () => {
    const resp = await api.query({ text: QUERY, tau_s: 25, tau_c: -1, top_k: 10 });
    expect(resp.entries.length).toBeGreaterThan(0);
    const rows = resultRows(resp);
    expect(rows.map((r) => r.adapterId)).toEqual(resp.entries.map((e) => e.adapter_id));
    const again = resultRows(await api.query({ text: QUERY, tau_s: 25, tau_c: -1, top_k: 10 }));
    expect(again).toEqual(rows);
  });

  it("raising tau_s never shrinks the passed set served by the real engine", async () => {
    let previous = new Set<string>();
    for (const tauS of [0, 1, 2, 3, 3.5, 4, 10, 25]) {
      const resp = await api.query({
        text: QUERY, tau_s: tauS, tau_c: -1, top_k: 10, include_failed: true,
      });
      const passed = new Set(
        resultRows(resp).filter((r) => r.passed).map((r) => r.adapterId));
      for (const id of previous) {
        expect(passed.has(id), `tau_s=${tauS} dropped ${id}`).toBe(true);
      }
      previous = passed;
    }
    expect(previous.size).toBeGreaterThan(0); // the widest filter passes everything cached
  });

  it("surfaces service rejections as typed errors", async () => {
    await expect(api.query({ text: "   " })).rejects.toMatchObject({ status: 400 });
  });
});
