/** Thin fetch client for the session server. */

import type {
  EventAck,
  EventRecord,
  NavigationEntry,
  ProjectDoc,
  Snapshot,
} from "./types";

export class SequenceConflict extends Error {
  constructor(public headSeq: number) {
    super(`sequence conflict; server head is ${headSeq}`);
  }
}

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(`${status}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (response.status === 409) {
      const body = await response.json();
      throw new SequenceConflict(body.head_seq as number);
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        detail = body.detail ?? detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, String(detail));
    }
    return (await response.json()) as T;
  }

  listProjects(): Promise<{ id: string; title: string; questions: number }[]> {
    return this.request("/api/projects");
  }

  getProject(projectId: string): Promise<ProjectDoc> {
    return this.request(`/api/projects/${encodeURIComponent(projectId)}`);
  }

  getNavigation(projectId: string): Promise<NavigationEntry[]> {
    return this.request(`/api/projects/${encodeURIComponent(projectId)}/navigation`);
  }

  createSession(projectId: string, viewerId: string): Promise<{ session_id: string; head_seq: number }> {
    return this.request("/api/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ project_id: projectId, viewer_id: viewerId }),
    });
  }

  getSnapshot(sessionId: string): Promise<Snapshot> {
    return this.request(`/api/sessions/${encodeURIComponent(sessionId)}/snapshot`);
  }

  postEvent(sessionId: string, record: EventRecord): Promise<EventAck> {
    return this.request(`/api/sessions/${encodeURIComponent(sessionId)}/events`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(record),
    });
  }

  postAnnotation(
    sessionId: string,
    annotation: { title: string; body: { type: string; value: string }[]; start_ms?: number; end_ms?: number },
  ): Promise<{ seq: number; annotation_id: string }> {
    return this.request(`/api/sessions/${encodeURIComponent(sessionId)}/annotations`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(annotation),
    });
  }

  mediaUrl(mediaId: string): string {
    return `${this.baseUrl}/media/${encodeURIComponent(mediaId)}`;
  }
}
