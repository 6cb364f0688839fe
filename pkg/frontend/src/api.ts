// Thin typed client for the planning service. All state lives server-side;
// the console only ever renders what these calls return.

import type {
  ApiErrorBody,
  AttemptRef,
  EnvironmentData,
  LoopResultData,
  SessionSummary,
  StatusData,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly detail: Record<string, unknown>;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message ?? `request failed with status ${status}`);
    this.status = status;
    this.code = body.code ?? "error";
    this.detail = body.detail ?? {};
  }
}

export class Client {
  constructor(readonly baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    let data: unknown = null;
    try {
      data = text ? JSON.parse(text) : null;
    } catch {
      data = { code: "bad_response", message: text, detail: {} };
    }
    if (!response.ok) {
      throw new ApiError(response.status, data as ApiErrorBody);
    }
    return data as T;
  }

  createSession(environment: EnvironmentData, actionSet = "lfo", promptSet = ""): Promise<{ session_id: string }> {
    return this.request("POST", "/sessions", {
      environment,
      action_set: actionSet,
      prompt_set: promptSet,
    });
  }

  getSession(id: string): Promise<SessionSummary> {
    return this.request("GET", `/sessions/${id}`);
  }

  getStatus(id: string): Promise<StatusData> {
    return this.request("GET", `/sessions/${id}/status`);
  }

  sendInstruction(id: string, text: string, maxRounds = 5): Promise<LoopResultData> {
    return this.request("POST", `/sessions/${id}/instruction`, { text, max_rounds: maxRounds });
  }

  sendFeedback(id: string, text: string): Promise<LoopResultData> {
    return this.request("POST", `/sessions/${id}/feedback`, { text });
  }

  approve(id: string, ref: AttemptRef): Promise<SessionSummary> {
    return this.request("POST", `/sessions/${id}/approve`, { attempt_ref: ref });
  }

  getTrace(id: string, step: number): Promise<{ step: number; records: Record<string, unknown>[] }> {
    return this.request("GET", `/sessions/${id}/trace/${step}`);
  }
}
