import type { ChoiceResponse, RoundView, SessionOptions, SessionStats, Side } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let resp: Response;
  try {
    resp = await fetch(url, init);
  } catch (err) {
    throw new ApiError(0, `server unreachable: ${err}`);
  }
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    throw new ApiError(resp.status, (body as { error?: string }).error ?? resp.statusText);
  }
  return body as T;
}

export class ApiClient {
  constructor(private baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}/v1${path}`;
  }

  createSession(options: SessionOptions = {}): Promise<{ session_id: string }> {
    return request(this.url("/sessions"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(options),
    });
  }

  getRound(sessionId: string): Promise<RoundView> {
    return request(this.url(`/sessions/${sessionId}/round`));
  }

  submitChoice(sessionId: string, roundId: string, side: Side): Promise<ChoiceResponse> {
    return request(this.url(`/sessions/${sessionId}/choice`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ round_id: roundId, side }),
    });
  }

  getStats(sessionId: string): Promise<SessionStats> {
    return request(this.url(`/sessions/${sessionId}/stats`));
  }
}
