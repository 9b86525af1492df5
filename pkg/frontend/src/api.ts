/** Thin HTTP client for the generation service. */

import {
  ArticulateResponseWire,
  GenerateRequestWire,
  GenerateResponseWire,
  ObjectDoc,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: unknown,
  ) {
    super(`API error ${status}: ${JSON.stringify(detail)}`);
  }
}

export class StudioApi {
  constructor(private baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await fetch(this.baseUrl + path, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const body = await res.json().catch(() => ({}));
    if (!res.ok) throw new ApiError(res.status, (body as { detail?: unknown }).detail ?? body);
    return body as T;
  }

  health(): Promise<{ status: string; checkpoint_loaded: boolean; corpus_loaded: boolean }> {
    return this.request("/api/health");
  }

  corpus(): Promise<{ objects: { id: string; category: string }[] }> {
    return this.request("/api/corpus");
  }

  object(id: string): Promise<{ object: ObjectDoc }> {
    return this.request(`/api/objects/${encodeURIComponent(id)}`);
  }

  generate(req: GenerateRequestWire): Promise<GenerateResponseWire> {
    return this.request("/api/generate", { method: "POST", body: JSON.stringify(req) });
  }

  articulate(abstraction: ObjectDoc, tau: number): Promise<ArticulateResponseWire> {
    return this.request("/api/articulate", {
      method: "POST",
      body: JSON.stringify({ tau, abstraction }),
    });
  }
}
