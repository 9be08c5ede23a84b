/** Thin fetch client. Every server error arrives as the {code, message,
 * detail} envelope; transport failures become ConnectionLost so callers can
 * tell "server said no" from "server unreachable". */

import type {
  ApiErrorBody,
  PortfolioResponse,
  ReviewRequest,
  ReviewResponse,
  RunSnapshot,
  RunsListResponse,
  TopicDetail,
  TopicsResponse,
} from "./types.js";

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;
  readonly detail: unknown;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.name = "ApiError";
    this.code = body.code;
    this.status = status;
    this.detail = body.detail;
  }
}

export class ConnectionLost extends Error {
  constructor(cause: unknown) {
    super(`server unreachable: ${cause instanceof Error ? cause.message : String(cause)}`);
    this.name = "ConnectionLost";
  }
}

export interface ArtifactResponse {
  topic: { layer: string; hash: string };
  payload: Record<string, unknown>;
  report: string;
  provenance: Record<string, unknown>;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private readonly base: string;
  private readonly token: string | null;
  private readonly fetchImpl: FetchLike;

  constructor(base = "", token: string | null = null, fetchImpl?: FetchLike) {
    this.base = base.replace(/\/+$/, "");
    this.token = token;
    // bind: bare window.fetch loses its receiver when stored
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  listRuns(): Promise<RunsListResponse> {
    return this.request("GET", "/runs");
  }

  snapshot(runId: string): Promise<RunSnapshot> {
    return this.request("GET", `/runs/${encodeURIComponent(runId)}`);
  }

  topics(runId: string, status?: string): Promise<TopicsResponse> {
    const query = status ? `?status=${encodeURIComponent(status)}` : "";
    return this.request("GET", `/runs/${encodeURIComponent(runId)}/topics${query}`);
  }

  portfolio(runId: string): Promise<PortfolioResponse> {
    return this.request("GET", `/runs/${encodeURIComponent(runId)}/portfolio`);
  }

  review(topicHash: string, body: ReviewRequest): Promise<ReviewResponse> {
    return this.request("POST", `/topics/${encodeURIComponent(topicHash)}/review`, body);
  }

  artifact(topicHash: string): Promise<ArtifactResponse> {
    return this.request("GET", `/artifacts/${encodeURIComponent(topicHash)}`);
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/healthz");
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { accept: "application/json" };
    if (this.token) {
      headers["authorization"] = `Bearer ${this.token}`;
    }
    const init: RequestInit = { method, headers };
    if (body !== undefined) {
      headers["content-type"] = "application/json";
      init.body = JSON.stringify(body);
    }
    let response: Response;
    try {
      response = await this.fetchImpl(this.base + path, init);
    } catch (exc) {
      throw new ConnectionLost(exc);
    }
    if (!response.ok) {
      throw new ApiError(response.status, await readErrorBody(response));
    }
    return (await response.json()) as T;
  }
}

async function readErrorBody(response: Response): Promise<ApiErrorBody> {
  try {
    const parsed = (await response.json()) as Partial<ApiErrorBody>;
    if (typeof parsed.code === "string" && typeof parsed.message === "string") {
      return { code: parsed.code, message: parsed.message, detail: parsed.detail ?? null };
    }
  } catch {
    // fall through: proxy or gateway answered with a non-envelope body
  }
  return {
    code: "Internal",
    message: `${response.status} ${response.statusText}`.trim(),
    detail: null,
  };
}

export type { TopicDetail };
