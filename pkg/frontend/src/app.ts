/**
 * DOM wiring for the console. All data comes from the service via ApiClient;
 * this file only moves values between controls, the URL, and the two panels.
 *
 * Re-query behavior: control changes are debounced at 150 ms and issued
 * latest-wins (the previous in-flight request is aborted). Slider moves also
 * re-shade the scatter immediately, client-side, without touching the
 * network; the authoritative result list still comes from the service.
 */
import { ApiClient, ServiceError } from "./api.js";
import { passingIds, resultRows, scatterModel, summaryLine, Region } from "./render.js";
import { decodeState, encodeState, DEFAULT_STATE, UiState } from "./state.js";
import { ScatterPoint, VARIANTS } from "./types.js";

const REGION_COLORS: Record<Region, string> = {
  passed: "#2e8b57",
  too_strong: "#c0392b",
  inconsistent: "#d68910",
  both: "#95a5a6",
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function main(): void {
  const params = new URLSearchParams(location.search);
  const api = new ApiClient(params.get("api") ?? "");
  let state: UiState = decodeState(location.search);
  let scatterPoints: ScatterPoint[] = [];
  let inFlight: AbortController | null = null;
  let debounceTimer: number | undefined;

  const queryInput = el<HTMLInputElement>("query-text");
  const variantSelect = el<HTMLSelectElement>("variant");
  const tauSSlider = el<HTMLInputElement>("tau-s");
  const tauCSlider = el<HTMLInputElement>("tau-c");
  const tauSLabel = el<HTMLElement>("tau-s-label");
  const tauCLabel = el<HTMLElement>("tau-c-label");
  const topKInput = el<HTMLInputElement>("top-k");
  const includeFailed = el<HTMLInputElement>("include-failed");
  const resultsBody = el<HTMLTableSectionElement>("results-body");
  const summary = el<HTMLElement>("summary");
  const banner = el<HTMLElement>("error-banner");
  const statusLine = el<HTMLElement>("status-line");
  const canvas = el<HTMLCanvasElement>("scatter");
  const scatterCaption = el<HTMLElement>("scatter-caption");
  const detailPane = el<HTMLElement>("detail");

  for (const v of VARIANTS) {
    const opt = document.createElement("option");
    opt.value = v;
    opt.textContent = v;
    variantSelect.appendChild(opt);
  }

  function controlsFromState(): void {
    queryInput.value = state.q;
    variantSelect.value = state.variant;
    tauSSlider.value = String(state.tauS);
    tauCSlider.value = String(state.tauC);
    topKInput.value = String(state.topK);
    includeFailed.checked = state.includeFailed;
    tauSLabel.textContent = state.tauS.toFixed(1);
    tauCLabel.textContent = state.tauC.toFixed(3);
  }

  function syncUrl(): void {
    const qs = encodeState(state);
    const apiParam = params.get("api");
    const merged = new URLSearchParams(qs);
    if (apiParam) merged.set("api", apiParam);
    const suffix = merged.toString();
    history.replaceState(null, "", suffix ? `?${suffix}` : location.pathname);
  }

  function showError(message: string | null): void {
    banner.textContent = message ?? "";
    banner.style.display = message ? "block" : "none";
  }

  function renderResults(rows: ReturnType<typeof resultRows>): void {
    resultsBody.replaceChildren();
    for (const row of rows) {
      const tr = document.createElement("tr");
      tr.className = row.passed ? "row-pass" : "row-fail";
      const cells = [
        String(row.rank),
        row.adapterId,
        row.scoreText,
        row.strengthText,
        row.consistencyText,
        row.zeroDirection ? `${row.badge} (zero direction)` : row.badge,
      ];
      for (const text of cells) {
        const td = document.createElement("td");
        td.textContent = text;
        tr.appendChild(td);
      }
      tr.addEventListener("click", () => void openDetail(row.adapterId));
      resultsBody.appendChild(tr);
    }
  }

  async function runQuery(): Promise<void> {
    if (!state.q.trim()) return;
    inFlight?.abort();
    const controller = new AbortController();
    inFlight = controller;
    try {
      const response = await api.query(
        {
          text: state.q,
          variant: state.variant,
          top_k: state.topK,
          tau_s: state.tauS,
          tau_c: state.tauC,
          include_failed: state.includeFailed,
        },
        controller.signal,
      );
      if (controller !== inFlight) return; // a newer request superseded this one
      showError(null);
      renderResults(resultRows(response));
      summary.textContent = summaryLine(response);
    } catch (err) {
      if (controller !== inFlight) return;
      if (err instanceof DOMException && err.name === "AbortError") return;
      showError(err instanceof ServiceError ? err.message : `service unreachable: ${err}`);
    }
  }

  function drawScatter(): void {
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    const { dots, regionCounts } = scatterModel(scatterPoints, state.tauS, state.tauC);
    const w = canvas.width;
    const h = canvas.height;
    const pad = 14;
    ctx.clearRect(0, 0, w, h);
    for (const dot of dots) {
      const px = pad + dot.x * (w - 2 * pad);
      const py = h - pad - dot.y * (h - 2 * pad);
      ctx.beginPath();
      ctx.arc(px, py, 3.5, 0, 2 * Math.PI);
      ctx.fillStyle = REGION_COLORS[dot.region];
      ctx.fill();
      if (dot.flagged) {
        ctx.strokeStyle = "#1a1a1a";
        ctx.lineWidth = 1.5;
        ctx.stroke();
      }
    }
    scatterCaption.textContent =
      `${regionCounts.passed} passing · ${regionCounts.too_strong} too strong · ` +
      `${regionCounts.inconsistent} inconsistent · ${regionCounts.both} both · ` +
      `${passingIds(scatterPoints, state.tauS, state.tauC).size} ids in region`;
  }

  function nearestAdapter(ev: MouseEvent): string | null {
    const rect = canvas.getBoundingClientRect();
    const mx = ((ev.clientX - rect.left) / rect.width) * canvas.width;
    const my = ((ev.clientY - rect.top) / rect.height) * canvas.height;
    const pad = 14;
    let best: { id: string; d2: number } | null = null;
    for (const p of scatterPoints) {
      const px = pad + p.strength_rank * (canvas.width - 2 * pad);
      const py = canvas.height - pad - p.consistency_rank * (canvas.height - 2 * pad);
      const d2 = (px - mx) ** 2 + (py - my) ** 2;
      if (d2 <= 64 && (best === null || d2 < best.d2)) best = { id: p.adapter_id, d2 };
    }
    return best ? best.id : null;
  }

  async function openDetail(adapterId: string): Promise<void> {
    state = { ...state, selection: adapterId };
    syncUrl();
    try {
      const d = await api.adapterDetail(adapterId);
      detailPane.replaceChildren();
      const title = document.createElement("h3");
      title.textContent = d.adapter_id;
      detailPane.appendChild(title);
      const dl = document.createElement("dl");
      const fields: Array<[string, string]> = [
        ["strength", d.strength.toFixed(4)],
        ["consistency", d.consistency.toFixed(4)],
        ["samples", String(d.sample_count)],
        ["dim", String(d.dim)],
        ["encoder", d.encoder_tag],
      ];
      for (const [k, v] of fields) {
        const dt = document.createElement("dt");
        dt.textContent = k;
        const dd = document.createElement("dd");
        dd.textContent = v;
        dl.append(dt, dd);
      }
      detailPane.appendChild(dl);
    } catch (err) {
      showError(err instanceof ServiceError ? err.message : String(err));
    }
  }

  function onControlsChanged(refetch: boolean): void {
    state = {
      ...state,
      q: queryInput.value,
      variant: (variantSelect.value as UiState["variant"]) || DEFAULT_STATE.variant,
      topK: Number(topKInput.value) || DEFAULT_STATE.topK,
      tauS: Number(tauSSlider.value),
      tauC: Number(tauCSlider.value),
      includeFailed: includeFailed.checked,
    };
    tauSLabel.textContent = state.tauS.toFixed(1);
    tauCLabel.textContent = state.tauC.toFixed(3);
    syncUrl();
    drawScatter(); // immediate, no fetch
    if (refetch) {
      window.clearTimeout(debounceTimer);
      debounceTimer = window.setTimeout(() => void runQuery(), 150);
    }
  }

  for (const slider of [tauSSlider, tauCSlider]) {
    slider.addEventListener("input", () => onControlsChanged(true));
  }
  for (const control of [variantSelect, topKInput, includeFailed]) {
    control.addEventListener("change", () => onControlsChanged(true));
  }
  el<HTMLFormElement>("query-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    onControlsChanged(false);
    void runQuery();
  });
  canvas.addEventListener("click", (ev) => {
    const id = nearestAdapter(ev);
    if (id) void openDetail(id);
  });

  controlsFromState();

  void api
    .health()
    .then((h) => {
      statusLine.textContent =
        `index ${h.index_id} · ${h.adapters} adapters · dim ${h.dim} · ${h.encoder_tag}`;
    })
    .catch((err) => showError(`service unreachable: ${err}`));
  void api
    .scatter()
    .then((s) => {
      scatterPoints = s.points;
      drawScatter();
    })
    .catch(() => {
      scatterCaption.textContent = "scatter unavailable (empty corpus or service down)";
    });

  if (state.q) void runQuery();
  if (state.selection) void openDetail(state.selection);
}

main();
