// Typed client for the server's six endpoints. The fetch function is
// injected so tests can intercept outgoing requests.

import type { EnvelopeWire } from "./crypto.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface QuoteWire {
  measurement: string;
  enclave_pubkey: string;
  initial_budget: { eps: string; delta: string };
  nonce: string;
  sig: string;
}

export interface SignedBudgetWire {
  eps: string;
  delta: string;
  serial: number;
  sig: string;
}

export interface QueryResponseWire {
  value: string;
  cost: { eps: string; delta: string };
  remaining: SignedBudgetWire;
}

export interface ApiError {
  status: number;
  error_kind: string;
  detail: string;
}

export class ServerApi {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.baseUrl + path, init);
    } catch (exc) {
      throw <ApiError>{
        status: 0,
        error_kind: "Transport",
        detail: String(exc),
      };
    }
    let body: unknown = null;
    try {
      body = await resp.json();
    } catch {
      body = null;
    }
    if (!resp.ok) {
      const err = (body ?? {}) as { error_kind?: string; detail?: string };
      throw <ApiError>{
        status: resp.status,
        error_kind: err.error_kind ?? "Unknown",
        detail: err.detail ?? "",
      };
    }
    return body as T;
  }

  attest(nonceHex: string): Promise<QuoteWire> {
    return this.json<QuoteWire>(`/attest?nonce=${nonceHex}`);
  }

  epsilon(): Promise<{ eps: string; serial: number; sig: string }> {
    return this.json(`/epsilon`);
  }

  delta(): Promise<{ delta: string; serial: number; sig: string }> {
    return this.json(`/delta`);
  }

  async pubkeyPem(): Promise<string> {
    const resp = await this.fetchFn(this.baseUrl + "/pubkeypem");
    return resp.text();
  }

  insert(envelope: EnvelopeWire): Promise<{ status: string; count: number }> {
    return this.json(`/insert`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ envelope }),
    });
  }

  query(program: string): Promise<QueryResponseWire> {
    return this.json(`/query`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ program }),
    });
  }
}
