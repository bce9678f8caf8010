// Thin client for the dialogue service. Exactly the four session endpoints;
// fetch is injectable so tests can mock the service.

import type { ChatEvent, SessionConfig, SessionInfo, TranscriptPayload } from "./types";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      const detail = await response.text();
      throw new ServiceError(response.status, detail || response.statusText);
    }
    return (await response.json()) as T;
  }

  createSession(config: SessionConfig): Promise<SessionInfo> {
    return this.request<SessionInfo>("/sessions", {
      method: "POST",
      body: JSON.stringify({ config }),
    });
  }

  postMessage(sessionId: string, text: string): Promise<ChatEvent> {
    return this.request<ChatEvent>(`/sessions/${sessionId}/messages`, {
      method: "POST",
      body: JSON.stringify({ text }),
    });
  }

  getTranscript(sessionId: string): Promise<TranscriptPayload> {
    return this.request<TranscriptPayload>(`/sessions/${sessionId}/transcript`);
  }

  eventsUrl(sessionId: string): string {
    return `${this.baseUrl}/sessions/${sessionId}/events`;
  }
}
