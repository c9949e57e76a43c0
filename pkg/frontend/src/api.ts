/**
 * REST client for the orchestrator.
 *
 * The UI never mutates state outside these endpoints.  Session updates
 * arrive by polling; feedback submissions echo the session revision so a
 * stale tab gets a conflict instead of clobbering newer state.
 */

import type { Feedback, SessionView } from "./types.js";

export class StaleRevisionError extends Error {}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class SessionApi {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const body = await response.json().catch(() => ({}));
    if (response.status === 409 && typeof body.error === "string" && body.error.includes("stale")) {
      throw new StaleRevisionError(body.error);
    }
    if (!response.ok) {
      throw new ApiError(response.status, body.error ?? response.statusText);
    }
    return body as T;
  }

  health(): Promise<{ status: string; version: string }> {
    return this.request("/v1/health");
  }

  createSession(prompt: string, mode = "auto"): Promise<SessionView> {
    return this.request("/v1/sessions", {
      method: "POST",
      body: JSON.stringify({ prompt, mode }),
    });
  }

  getSession(id: string): Promise<SessionView> {
    return this.request(`/v1/sessions/${id}`);
  }

  listSessions(phase?: string): Promise<SessionView[]> {
    const query = phase ? `?phase=${encodeURIComponent(phase)}` : "";
    return this.request(`/v1/sessions${query}`);
  }

  advance(id: string): Promise<SessionView> {
    return this.request(`/v1/sessions/${id}/advance`, { method: "POST", body: "{}" });
  }

  submitFeedback(id: string, feedback: Feedback, revision: number): Promise<SessionView> {
    return this.request(`/v1/sessions/${id}/feedback`, {
      method: "POST",
      body: JSON.stringify({ ...feedback, revision }),
    });
  }

  artifactUrl(id: string, name: string): string {
    return `${this.baseUrl}/v1/sessions/${id}/artifacts/${name}`;
  }
}

/**
 * Poll a session until stopped; invokes onUpdate only when the revision
 * changes.  Returns a stop function.
 */
export function pollSession(
  api: SessionApi,
  id: string,
  onUpdate: (view: SessionView) => void,
  intervalMs = 1000,
  schedule: (fn: () => void, ms: number) => ReturnType<typeof setTimeout> = setTimeout,
): () => void {
  let stopped = false;
  let lastRevision = -1;

  const tick = async () => {
    if (stopped) return;
    try {
      const view = await api.getSession(id);
      if (view.revision !== lastRevision) {
        lastRevision = view.revision;
        onUpdate(view);
      }
    } catch {
      // transient polling errors are retried on the next tick
    }
    if (!stopped) schedule(tick, intervalMs);
  };
  void tick();
  return () => {
    stopped = true;
  };
}
