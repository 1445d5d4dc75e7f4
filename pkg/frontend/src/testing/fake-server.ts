/** In-memory stand-in for the labeling service, speaking the same wire
 * contract: one pending query at a time, 409 on stale or exhausted
 * submissions with no state change, committed snapshots on read. */

import type { FetchLike } from "../api.js";
import type { Label, PendingQuery, SessionSnapshot } from "../types.js";

interface FakeSession {
  id: string;
  budget: number;
  iteration: number;
  history: { instance_id: number; label: Label }[];
  curve: { iteration: number; cumulative: number }[];
  pendingIndex: number;
}

export class FakeService {
  sessions = new Map<string, FakeSession>();
  labelRequests: { session: string; instance_id: number; label: Label }[] = [];
  private nextId = 1;

  constructor(private readonly queryOrder: number[]) {}

  /** Advance a session server-side, as another tab or analyst would. */
  advanceExternally(sessionId: string, label: Label): void {
    const s = this.sessions.get(sessionId);
    if (!s) throw new Error(`no session ${sessionId}`);
    this.applyLabel(s, this.pendingInstance(s)!, label);
  }

  private pendingInstance(s: FakeSession): number | null {
    if (s.iteration >= s.budget || s.pendingIndex >= this.queryOrder.length) return null;
    return this.queryOrder[s.pendingIndex]!;
  }

  private pendingPayload(s: FakeSession): PendingQuery | null {
    const instance = this.pendingInstance(s);
    if (instance === null) return null;
    return {
      instance_id: instance,
      features: { x0: instance, x1: -instance },
      score: -instance / 10,
      iteration: s.iteration,
      budget_remaining: s.budget - s.iteration,
    };
  }

  private snapshot(s: FakeSession): SessionSnapshot {
    const found = s.curve.length ? s.curve[s.curve.length - 1]!.cumulative : 0;
    return {
      session_id: s.id,
      dataset_id: "fake",
      status: this.pendingInstance(s) === null ? "exhausted" : "active",
      iteration: s.iteration,
      budget: s.budget,
      anomalies_found: found,
      config: { tau: 0.03 },
      query_history: s.history.map((h) => ({ ...h })),
      curve: s.curve.map((p) => ({ ...p })),
      weight_norm: 1.0,
      feature_medians: { x0: 0, x1: 0 },
      pending: this.pendingPayload(s),
    };
  }

  private applyLabel(s: FakeSession, instance: number, label: Label) {
    const prev = s.curve.length ? s.curve[s.curve.length - 1]!.cumulative : 0;
    s.history.push({ instance_id: instance, label });
    s.iteration += 1;
    s.pendingIndex += 1;
    s.curve.push({ iteration: s.iteration, cumulative: prev + (label === "anomaly" ? 1 : 0) });
  }

  fetch: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const path = new URL(url, "http://fake").pathname;

    if (method === "POST" && path === "/sessions") {
      const body = JSON.parse(String(init?.body ?? "{}"));
      const s: FakeSession = {
        id: `fake-${this.nextId++}`,
        budget: body.budget ?? 60,
        iteration: 0,
        history: [],
        curve: [],
        pendingIndex: 0,
      };
      this.sessions.set(s.id, s);
      return json(201, this.snapshot(s));
    }

    const match = path.match(/^\/sessions\/([^/]+)\/(next|label|state)$/);
    if (!match) return json(404, { code: "not_found", message: `no route ${path}` });
    const s = this.sessions.get(match[1]!);
    if (!s) return json(404, { code: "not_found", message: `unknown session ${match[1]}` });

    if (match[2] === "next") {
      const pending = this.pendingPayload(s);
      if (!pending) return json(409, { code: "budget_exhausted", message: "session complete" });
      return json(200, pending);
    }
    if (match[2] === "state") {
      return json(200, this.snapshot(s));
    }
    // label
    const body = JSON.parse(String(init?.body ?? "{}"));
    this.labelRequests.push({ session: s.id, instance_id: body.instance_id, label: body.label });
    const pending = this.pendingInstance(s);
    if (pending === null) {
      return json(409, { code: "budget_exhausted", message: "session complete" });
    }
    if (body.instance_id !== pending) {
      return json(409, {
        code: "stale_instance",
        message: `label for ${body.instance_id} does not match pending ${pending}`,
      });
    }
    this.applyLabel(s, pending, body.label);
    const snap = this.snapshot(s);
    return json(200, {
      accepted: true,
      iteration: s.iteration,
      anomalies_found: snap.anomalies_found,
      curve_point: s.curve[s.curve.length - 1],
      status: snap.status,
      next: snap.pending,
    });
  };
}

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
