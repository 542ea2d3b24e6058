/**
 * Typed client for the dashboard service endpoints.  `fetch` is
 * injectable so the store and tests can run without a server.
 */

import type { SelectionMap } from './encode';

export interface AttributeBlock {
  name: string;
  predictions: (number | null)[];
  predictions_raw: (number | null)[];
  oracle?: (number | null)[];
}

export interface QueryResponse {
  schema_fingerprint: string;
  total: number | null;
  total_raw: number | null;
  attributes: AttributeBlock[];
  oracle_total?: number | null;
  latency_ms: number;
}

export interface LatentPointDoc {
  lo: number;
  hi: number;
  x: number | null;
  y: number | null;
  value: number | null;
  value_raw: number | null;
  length: number;
}

export interface LatentResponse {
  attribute: string;
  bins: number;
  points: LatentPointDoc[];
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = (await resp.json()) as { detail?: string };
        if (body.detail) {
          detail = body.detail;
        }
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  health(): Promise<{ status: string; schema_fingerprint: string; oracle: boolean }> {
    return this.request('/health');
  }

  schema(): Promise<unknown> {
    return this.request('/schema');
  }

  model(): Promise<unknown> {
    return this.request('/model');
  }

  query(
    state: SelectionMap,
    withOracle: boolean,
    fingerprint: string,
    signal?: AbortSignal,
  ): Promise<QueryResponse> {
    return this.request('/query', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({
        schema_fingerprint: fingerprint,
        state,
        with_oracle: withOracle,
      }),
      signal,
    });
  }

  latent(attribute: string, context: SelectionMap, signal?: AbortSignal): Promise<LatentResponse> {
    return this.request('/latent', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ attribute, context }),
      signal,
    });
  }
}
