/**
 * Thin typed client for the query service. No retries, no caching — the
 * service is local and cheap; the app layer handles debounce and
 * latest-wins cancellation via AbortSignal.
 */
import {
  AdapterDetail,
  AdaptersPage,
  HealthResponse,
  QueryResponse,
  ScatterResponse,
  ScreeningResponse,
  Variant,
} from "./types.js";

export class ServiceError extends Error {
  constructor(public status: number, public detail: string) {
    super(`service returned ${status}: ${detail}`);
    this.name = "ServiceError";
  }
}

export interface QueryRequest {
  text: string;
  variant?: Variant;
  top_k?: number;
  tau_s?: number;
  tau_c?: number;
  include_failed?: boolean;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private base: string;
  private fetchFn: FetchLike;

  constructor(baseUrl = "", fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    // bind so a bare `fetch` keeps its window receiver
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async go<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(`${this.base}${path}`, init);
    let body: unknown;
    try {
      body = await resp.json();
    } catch {
      body = undefined;
    }
    if (!resp.ok) {
      const detail =
        body && typeof body === "object" && "detail" in body
          ? String((body as { detail: unknown }).detail)
          : resp.statusText;
      throw new ServiceError(resp.status, detail);
    }
    return body as T;
  }

  health(): Promise<HealthResponse> {
    return this.go("/v1/health");
  }

  query(req: QueryRequest, signal?: AbortSignal): Promise<QueryResponse> {
    return this.go("/v1/query", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
      signal,
    });
  }

  adapters(offset = 0, limit = 100): Promise<AdaptersPage> {
    return this.go(`/v1/adapters?offset=${offset}&limit=${limit}`);
  }

  adapterDetail(adapterId: string): Promise<AdapterDetail> {
    return this.go(`/v1/adapters/${encodeURIComponent(adapterId)}`);
  }

  scatter(): Promise<ScatterResponse> {
    return this.go("/v1/scatter");
  }

  screening(strengthSplit = 0.5, consistencySplit = 0.5): Promise<ScreeningResponse> {
    return this.go(
      `/v1/screening?strength_split=${strengthSplit}&consistency_split=${consistencySplit}`,
    );
  }
}
