/** Typed client for the labeling service. */

import type {
  DatasetInfo,
  Label,
  LabelResult,
  PendingQuery,
  SessionCreateRequest,
  SessionSnapshot,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }

  get isConflict(): boolean {
    return this.status === 409;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchImpl(this.baseUrl + path, init);
    } catch (e) {
      throw new ApiError(0, "unreachable", `service unreachable: ${String(e)}`);
    }
    const body = await resp.json().catch(() => null);
    if (!resp.ok) {
      const code = body && typeof body.code === "string" ? body.code : "error";
      const message =
        body && typeof body.message === "string" ? body.message : `HTTP ${resp.status}`;
      throw new ApiError(resp.status, code, message);
    }
    return body as T;
  }

  healthz(): Promise<{ status: string }> {
    return this.request("/healthz");
  }

  listDatasets(): Promise<{ datasets: DatasetInfo[] }> {
    return this.request("/datasets");
  }

  createSession(req: SessionCreateRequest): Promise<SessionSnapshot> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
  }

  getNext(sessionId: string): Promise<PendingQuery> {
    return this.request(`/sessions/${sessionId}/next`);
  }

  submitLabel(sessionId: string, instanceId: number, label: Label): Promise<LabelResult> {
    return this.request(`/sessions/${sessionId}/label`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ instance_id: instanceId, label }),
    });
  }

  getState(sessionId: string): Promise<SessionSnapshot> {
    return this.request(`/sessions/${sessionId}/state`);
  }
}
