/** Shared test utilities: HTML parsing and a recording fetch stub. */

import { Window } from "happy-dom";

import { ApiError, type FetchLike } from "../src/api.js";

/** Parse an HTML fragment into a queryable container element. */
export function parseFragment(html: string) {
  const window = new Window();
  const container = window.document.createElement("div");
  container.innerHTML = html;
  return container;
}

export interface RecordedRequest {
  url: string;
  method: string;
  body: unknown;
}

export interface FetchStub {
  fetchFn: FetchLike;
  requests: RecordedRequest[];
}

/**
 * A fetch stub that records every request and answers from a route table
 * keyed by "METHOD path".  Unrouted paths get a 404 in the service's error
 * shape.
 */
export function stubFetch(
  routes: Record<string, { status?: number; body: unknown }>,
): FetchStub {
  const requests: RecordedRequest[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    requests.push({
      url,
      method,
      body: typeof init?.body === "string" ? JSON.parse(init.body) : null,
    });
    const route = routes[`${method} ${path}`];
    if (route === undefined) {
      return jsonResponse(404, {
        detail: `no route for ${method} ${path}`,
        error_type: "CountyNotFound",
      });
    }
    return jsonResponse(route.status ?? 200, route.body);
  };
  return { fetchFn, requests };
}

export function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

/** Await a promise that must reject with an ApiError, and return it typed. */
export async function apiErrorFrom(promise: Promise<unknown>): Promise<ApiError> {
  try {
    await promise;
  } catch (error) {
    if (error instanceof ApiError) {
      return error;
    }
    throw new Error(`expected ApiError, got ${String(error)}`);
  }
  throw new Error("expected the request to fail, but it succeeded");
}
