import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";

interface Call {
  url: string;
  method: string;
  auth: string;
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

/** Scripted fetch double: pops one canned response per call, records calls. */
function scriptedFetch(script: Array<(call: Call) => Response>) {
  const calls: Call[] = [];
  const impl = async (input: string, init?: RequestInit): Promise<Response> => {
    const headers = (init?.headers ?? {}) as Record<string, string>;
    const call: Call = {
      url: input,
      method: init?.method ?? "GET",
      auth: headers["Authorization"] ?? "",
    };
    calls.push(call);
    const next = script.shift();
    if (next === undefined) {
      throw new Error(`unexpected call ${call.method} ${call.url}`);
    }
    return next(call);
  };
  return { impl, calls };
}

const LOGIN_OK = () =>
  jsonResponse(200, {
    token: "fresh-token",
    expiresIn: 900,
    subject: "u",
    assignments: [],
  });

describe("401 refresh-retry", () => {
  it("refreshes the token and retries exactly once", async () => {
    const { impl, calls } = scriptedFetch([
      LOGIN_OK, // initial login
      () => jsonResponse(401, { code: "token_expired", message: "expired" }),
      LOGIN_OK, // silent re-login
      (call) => {
        expect(call.auth).toBe("Bearer fresh-token");
        return jsonResponse(200, { items: [], total: 0, page: 1, pageSize: 20 });
      },
    ]);
    const client = new ApiClient("http://api", impl);
    await client.login("u", "p");
    const page = await client.listStudies();
    expect(page.total).toBe(0);
    expect(calls).toHaveLength(4);
    expect(calls[2].url).toBe("http://api/auth/login");
  });

  it("gives up after the second 401 instead of looping", async () => {
    const { impl, calls } = scriptedFetch([
      LOGIN_OK,
      () => jsonResponse(401, { code: "token_expired", message: "expired" }),
      LOGIN_OK,
      () => jsonResponse(401, { code: "token_invalid", message: "nope" }),
    ]);
    const client = new ApiClient("http://api", impl);
    await client.login("u", "p");
    await expect(client.listStudies()).rejects.toMatchObject({
      status: 401,
      code: "token_invalid",
    });
    expect(calls).toHaveLength(4); // no further retries
  });

  it("does not attempt a refresh before any login", async () => {
    const { impl, calls } = scriptedFetch([
      () => jsonResponse(401, { code: "token_missing", message: "no token" }),
    ]);
    const client = new ApiClient("http://api", impl);
    await expect(client.listStudies()).rejects.toMatchObject({ status: 401 });
    expect(calls).toHaveLength(1);
  });

  it("surfaces server error codes and details", async () => {
    const { impl } = scriptedFetch([
      LOGIN_OK,
      () =>
        jsonResponse(422, {
          code: "validation_failed",
          message: "validation failed",
          details: { errors: [{ field: "name" }] },
        }),
    ]);
    const client = new ApiClient("http://api", impl);
    await client.login("u", "p");
    await expect(
      client.createInStudy("s1", "surveys", {}),
    ).rejects.toMatchObject({
      status: 422,
      code: "validation_failed",
      details: { errors: [{ field: "name" }] },
    });
  });

  it("propagates a failed login without storing a token", async () => {
    const { impl } = scriptedFetch([
      () => jsonResponse(401, { code: "bad_credentials", message: "invalid" }),
    ]);
    const client = new ApiClient("http://api", impl);
    await expect(client.login("u", "wrong")).rejects.toMatchObject({
      code: "bad_credentials",
    });
    expect(client.authenticated).toBe(false);
  });
});
