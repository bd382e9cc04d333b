import { File } from "node:buffer";
import { afterEach, describe, expect, it, vi } from "vitest";
import { ApiError, Client, FileTooLarge } from "../dist/api.js";

const realFetch = globalThis.fetch;

afterEach(() => {
  globalThis.fetch = realFetch;
});

function jsonResponse(body: unknown, status = 200, statusText = ""): Response {
  return new Response(JSON.stringify(body), {
    status,
    statusText,
    headers: { "content-type": "application/json" },
  });
}

describe("upload size pre-check", () => {
  it("rejects an oversize file before any network activity", async () => {
    const fetchSpy = vi.fn();
    globalThis.fetch = fetchSpy as typeof fetch;
    const client = new Client("http://example.test");
    const big = new File([new Uint8Array(600 * 1024)], "big.csv",
                         { type: "text/csv" });

    const error = await client
      .uploadDataset("sid", big as unknown as Blob, 512000)
      .catch((e: unknown) => e);

    expect(error).toBeInstanceOf(FileTooLarge);
    expect((error as FileTooLarge).size).toBe(614400);
    expect((error as FileTooLarge).limit).toBe(512000);
    expect(fetchSpy).not.toHaveBeenCalled();
  });

  it("sends a file exactly at the limit with its bytes intact", async () => {
    const calls: { url: string; init: RequestInit }[] = [];
    globalThis.fetch = vi.fn(async (url: RequestInfo | URL, init?: RequestInit) => {
      calls.push({ url: String(url), init: init! });
      return jsonResponse({ session_id: "sid", prompt: { kind: "text", text: "" } });
    }) as typeof fetch;
    const client = new Client("");
    const file = new File([new Uint8Array(512000)], "edge.csv",
                          { type: "text/csv" });

    await client.uploadDataset("sid", file as unknown as Blob, 512000, "outcome");

    expect(calls).toHaveLength(1);
    expect(calls[0]!.url).toBe("/api/sessions/sid/dataset?label=outcome");
    expect((calls[0]!.init.body as ArrayBuffer).byteLength).toBe(512000);
    expect((calls[0]!.init.headers as Record<string, string>)["content-type"])
      .toBe("text/csv");
  });
});

describe("error decoding", () => {
  it("surfaces the server's structured error fields", async () => {
    globalThis.fetch = vi.fn(async () => jsonResponse(
      { code: "wrong_state", message: "cannot answer now",
        detail: { current: "done" } },
      409)) as typeof fetch;
    const client = new Client("");

    const error = await client.answer("sid", "5").catch((e: unknown) => e);

    expect(error).toBeInstanceOf(ApiError);
    const api = error as ApiError;
    expect(api.status).toBe(409);
    expect(api.code).toBe("wrong_state");
    expect(api.message).toBe("cannot answer now");
    expect(api.detail).toEqual({ current: "done" });
  });

  it("falls back to the HTTP status when the body is not JSON", async () => {
    globalThis.fetch = vi.fn(async () => new Response("boom", {
      status: 502, statusText: "Bad Gateway" })) as typeof fetch;
    const client = new Client("");

    const error = await client.getSession("sid").catch((e: unknown) => e);

    expect(error).toBeInstanceOf(ApiError);
    expect((error as ApiError).code).toBe("http_error");
    expect((error as ApiError).message).toBe("502 Bad Gateway");
  });
});

describe("request shapes", () => {
  it("posts grids wrapped, defaults empty, and survey ratings as numbers", async () => {
    const bodies: unknown[] = [];
    globalThis.fetch = vi.fn(async (_url: RequestInfo | URL, init?: RequestInit) => {
      bodies.push(JSON.parse(init!.body as string));
      return jsonResponse({ session_id: "sid", prompt: { kind: "text", text: "" } });
    }) as typeof fetch;
    const client = new Client("");

    await client.startTraining("sid", {});
    await client.startTraining("sid", { epochs: [50, 100] });
    await client.submitSurvey("sid", 4, "useful");
    await client.submitSurvey("sid", 2);
    await client.openSession("training");

    expect(bodies[0]).toEqual({});
    expect(bodies[1]).toEqual({ grid: { epochs: [50, 100] } });
    expect(bodies[2]).toEqual({ rating: 4, comment: "useful" });
    expect(bodies[3]).toEqual({ rating: 2 });
    expect(bodies[4]).toEqual({ flow: "training" });
  });

  it("builds download urls from the configured base", () => {
    const client = new Client("http://127.0.0.1:9999");
    expect(client.modelUrl("j1")).toBe("http://127.0.0.1:9999/api/jobs/j1/model");
    expect(client.rocUrl("j1")).toBe("http://127.0.0.1:9999/api/jobs/j1/roc.svg");
  });
});
