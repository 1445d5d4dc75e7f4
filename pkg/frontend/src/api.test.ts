import { describe, expect, it } from "vitest";

import { ApiError, ServiceClient } from "./api.js";

describe("service client", () => {
  it("sends labels as JSON to the right route", async () => {
    const calls: { url: string; init?: RequestInit }[] = [];
    const client = new ServiceClient("http://api", async (url, init) => {
      calls.push({ url, init });
      return new Response(JSON.stringify({ accepted: true }), { status: 200 });
    });
    await client.submitLabel("abc", 42, "anomaly");
    expect(calls[0]?.url).toBe("http://api/sessions/abc/label");
    expect(calls[0]?.init?.method).toBe("POST");
    expect(JSON.parse(String(calls[0]?.init?.body))).toEqual({
      instance_id: 42,
      label: "anomaly",
    });
  });

  it("turns error bodies into ApiError with code and status", async () => {
    const client = new ServiceClient("http://api", async () =>
      new Response(JSON.stringify({ code: "stale_instance", message: "nope" }), { status: 409 }),
    );
    const err = await client.getNext("abc").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(409);
    expect(err.code).toBe("stale_instance");
    expect(err.isConflict).toBe(true);
  });

  it("wraps network failures as status 0", async () => {
    const client = new ServiceClient("http://api", async () => {
      throw new TypeError("fetch failed");
    });
    const err = await client.healthz().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(0);
    expect(err.code).toBe("unreachable");
  });

  it("copes with non-JSON error bodies", async () => {
    const client = new ServiceClient("http://api", async () =>
      new Response("<html>gateway error</html>", { status: 502 }),
    );
    const err = await client.healthz().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("error");
    expect(err.message).toContain("502");
  });
});
