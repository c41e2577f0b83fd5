import type {
  CandidatesResponse,
  ExplainResponse,
  ProjectionResponse,
  RulesResponse,
  SessionSummary,
} from "./types";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class StaleDigestError extends Error {
  constructor() {
    super("stale session digest; refresh and retry");
  }
}

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

/** Thin typed client over /api/v1; the server owns every number we show. */
export class ApiClient {
  constructor(
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
    private readonly base: string = "/api/v1",
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.base + path, init);
    if (response.status === 409) {
      throw new StaleDigestError();
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  createSession(dataset: string): Promise<SessionSummary> {
    return this.post("/sessions", { dataset });
  }

  getSession(id: string): Promise<SessionSummary> {
    return this.request(`/sessions/${id}`);
  }

  getProjection(id: string, decimate = 0): Promise<ProjectionResponse> {
    const query = decimate > 0 ? `?decimate=${decimate}` : "";
    return this.request(`/sessions/${id}/projection${query}`);
  }

  getCandidates(id: string, topK = 10): Promise<CandidatesResponse> {
    return this.request(`/sessions/${id}/candidates?top_k=${topK}`);
  }

  accept(
    id: string,
    digest: string,
    corners: [number, number, number, number],
    predictedClass: string,
  ): Promise<SessionSummary> {
    return this.post(`/sessions/${id}/accept`, {
      digest,
      corners,
      predicted_class: predictedClass,
    });
  }

  undo(id: string, digest: string): Promise<SessionSummary> {
    return this.post(`/sessions/${id}/undo`, { digest });
  }

  prune(
    id: string,
    digest: string,
    minCases: number,
    mode: "refuse" | "associate",
  ): Promise<SessionSummary> {
    return this.post(`/sessions/${id}/prune`, { digest, min_cases: minCases, mode });
  }

  join(id: string, digest: string): Promise<SessionSummary> {
    return this.post(`/sessions/${id}/join`, { digest });
  }

  getRules(id: string): Promise<RulesResponse> {
    return this.request(`/sessions/${id}/rules`);
  }

  explain(id: string, point: number[]): Promise<ExplainResponse> {
    return this.post(`/sessions/${id}/explain`, {
      point,
      purity_threshold: 0.95,
      initial_resolution: 1.0,
      decrement: 0.25,
      min_resolution: 0.5,
    });
  }
}
