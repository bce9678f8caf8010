// Server-push event consumption. The service streams `data: {json}` frames;
// parseSseChunk is pure so the framing logic is testable without a socket.

import type { ChatEvent } from "./types";

export interface SseHandlers {
  onEvent: (event: ChatEvent) => void;
  onError: (message: string) => void;
  onClose?: () => void;
}

export function parseSseChunk(buffer: string): { events: ChatEvent[]; rest: string } {
  const events: ChatEvent[] = [];
  const frames = buffer.split("\n\n");
  const rest = frames.pop() ?? "";
  for (const frame of frames) {
    for (const line of frame.split("\n")) {
      if (line.startsWith("data: ")) {
        try {
          events.push(JSON.parse(line.slice("data: ".length)) as ChatEvent);
        } catch {
          // tolerate keep-alive or malformed frames; the transcript endpoint
          // remains the source of truth
        }
      }
    }
  }
  return { events, rest };
}

/** Reads the event stream via fetch; resolves when the server closes it. */
export async function consumeEventStream(
  url: string,
  handlers: SseHandlers,
  fetchImpl: (url: string) => Promise<Response> = (u) => fetch(u),
): Promise<void> {
  let response: Response;
  try {
    response = await fetchImpl(url);
  } catch (error) {
    handlers.onError(`connection failed: ${String(error)}`);
    return;
  }
  if (!response.ok || !response.body) {
    handlers.onError(`event stream unavailable (${response.status})`);
    return;
  }
  const reader = response.body.getReader();
  const decoder = new TextDecoder();
  let buffer = "";
  for (;;) {
    const { value, done } = await reader.read();
    if (done) {
      break;
    }
    buffer += decoder.decode(value, { stream: true });
    const { events, rest } = parseSseChunk(buffer);
    buffer = rest;
    events.forEach(handlers.onEvent);
  }
  handlers.onClose?.();
}
