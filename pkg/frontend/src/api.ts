/**
 * Typed client for the soil copilot HTTP API.
 *
 * The base URL and fetch implementation are injectable so tests can record
 * requests or point the client at a scripted server.  Domain errors arrive
 * as `{detail, error_type}` JSON bodies and are rethrown as ApiError;
 * transport failures propagate as whatever the fetch implementation threw.
 */

import type {
  ChatResponse,
  CountyRecord,
  HealthResponse,
  PersonasResponse,
} from "./types.js";

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

/** An HTTP error response from the service, with its parsed detail. */
export class ApiError extends Error {
  readonly status: number;
  readonly errorType: string | null;

  constructor(status: number, detail: string, errorType: string | null = null) {
    super(detail);
    this.name = "ApiError";
    this.status = status;
    this.errorType = errorType;
  }
}

async function errorFrom(response: Response): Promise<ApiError> {
  let detail = `request failed with status ${response.status}`;
  let errorType: string | null = null;
  try {
    const body = await response.json();
    if (typeof body.detail === "string") {
      detail = body.detail;
    } else if (body.detail !== undefined) {
      detail = JSON.stringify(body.detail);
    }
    if (typeof body.error_type === "string") {
      errorType = body.error_type;
    }
  } catch {
    // Non-JSON error body; keep the status-line message.
  }
  return new ApiError(response.status, detail, errorType);
}

export class CopilotClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl = "", fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      throw await errorFrom(response);
    }
    return response.json() as Promise<T>;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  health(): Promise<HealthResponse> {
    return this.request<HealthResponse>("/healthz");
  }

  personas(): Promise<PersonasResponse> {
    return this.request<PersonasResponse>("/personas");
  }

  county(name: string): Promise<CountyRecord> {
    return this.request<CountyRecord>(
      `/counties/${encodeURIComponent(name)}`,
    );
  }

  callTool<T>(name: string, args: Record<string, unknown>): Promise<T> {
    return this.post<T>(`/tools/${encodeURIComponent(name)}`, args);
  }

  /**
   * One agent exchange.  The active persona is sent with every call;
   * passing the session id of an earlier exchange continues that session.
   */
  chat(
    message: string,
    persona: string,
    sessionId: string | null = null,
  ): Promise<ChatResponse> {
    const body: Record<string, unknown> = { message, persona };
    if (sessionId !== null) {
      body.session_id = sessionId;
    }
    return this.post<ChatResponse>("/chat", body);
  }
}
