import type { Click, SessionInfo, SubmitOutcome } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface ApiOptions {
  fetchFn?: FetchLike;
  /** Extra attempts after the first when the transport itself fails. */
  retries?: number;
  /** Base delay; doubles per retry. */
  backoffMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

export class SessionUnavailableError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "SessionUnavailableError";
  }
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

/**
 * Typed client for the collection service.
 *
 * Transport failures (fetch rejecting) are retried with exponential
 * backoff; HTTP error statuses are never retried because the server has
 * already spoken. Recorded clicks live in the caller, so a failed
 * submission loses nothing.
 */
export class ApiClient {
  private fetchFn: FetchLike;
  private retries: number;
  private backoffMs: number;
  private sleep: (ms: number) => Promise<void>;

  constructor(
    readonly baseUrl: string = "",
    opts: ApiOptions = {},
  ) {
    this.fetchFn = opts.fetchFn ?? ((url, init) => fetch(url, init));
    this.retries = opts.retries ?? 4;
    this.backoffMs = opts.backoffMs ?? 250;
    this.sleep = opts.sleep ?? defaultSleep;
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let delay = this.backoffMs;
    let lastErr: unknown;
    for (let attempt = 0; attempt <= this.retries; attempt++) {
      if (attempt > 0) {
        await this.sleep(delay);
        delay *= 2;
      }
      try {
        return await this.fetchFn(this.baseUrl + path, init);
      } catch (err) {
        lastErr = err;
      }
    }
    throw lastErr instanceof Error ? lastErr : new Error(String(lastErr));
  }

  async health(): Promise<boolean> {
    try {
      const res = await this.request("/api/health");
      return res.status === 200;
    } catch {
      return false;
    }
  }

  async newSession(): Promise<SessionInfo> {
    const res = await this.request("/api/session");
    const body = await parseJson(res);
    if (res.status !== 200) {
      throw new SessionUnavailableError(res.status, errorMessage(body, res.status));
    }
    return body as SessionInfo;
  }

  imageUrl(imagePath: string): string {
    return this.baseUrl + imagePath;
  }

  async fetchImage(imagePath: string): Promise<ArrayBuffer> {
    const res = await this.request(imagePath);
    if (res.status !== 200) {
      throw new Error(`image request failed with status ${res.status}`);
    }
    return res.arrayBuffer();
  }

  async submit(sessionId: string, trialId: string, clicks: Click[]): Promise<SubmitOutcome> {
    const res = await this.request("/api/response", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ session_id: sessionId, trial_id: trialId, clicks }),
    });
    const body = await parseJson(res);
    if (res.status === 200) {
      return { kind: "ok", remaining: Number((body as { remaining: number }).remaining) };
    }
    if (res.status === 422) {
      const v = (body as { violations?: unknown }).violations;
      return {
        kind: "violations",
        violations: Array.isArray(v) ? v.map(String) : [errorMessage(body, res.status)],
      };
    }
    if (res.status === 409) {
      return { kind: "already_submitted" };
    }
    return { kind: "rejected", status: res.status, message: errorMessage(body, res.status) };
  }
}

async function parseJson(res: Response): Promise<unknown> {
  try {
    return await res.json();
  } catch {
    return {};
  }
}

function errorMessage(body: unknown, status: number): string {
  if (body && typeof body === "object" && "error" in body) {
    return String((body as { error: unknown }).error);
  }
  return `request failed with status ${status}`;
}
