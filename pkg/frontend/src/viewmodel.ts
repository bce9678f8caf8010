// Pure view state: events in, bubble list + composer state out. Replaying the
// same event log always rebuilds the identical list; nothing is re-classified
// client-side.

import type { ChatEvent, ClarifyLevel, TranscriptPayload } from "./types";

export type ComposerState = "enabled" | "working" | "ended";

export interface Badge {
  label: string;
  level: ClarifyLevel;
  domain?: string;
}

export interface Bubble {
  speaker: "user" | "assistant" | "notice";
  text: string;
  turn: number;
  badge: Badge | null;
  apiPanel: string[];
}

export class WrongStateError extends Error {}

function capitalize(word: string): string {
  return word.charAt(0).toUpperCase() + word.slice(1);
}

/** Badge text comes only from the event's own fields. */
export function badgeFor(level: ClarifyLevel, domain?: string): Badge {
  if (level === "expert" && domain) {
    return { label: `${capitalize(domain)} expert asks`, level, domain };
  }
  if (level === "expert") {
    return { label: "Expert asks", level };
  }
  return { label: "Supervisor asks", level };
}

export class ChatViewModel {
  readonly bubbles: Bubble[] = [];
  composer: ComposerState = "enabled";
  status: "awaiting_user" | "working" | "ended" = "awaiting_user";
  endedReason: string | null = null;
  inlineError: string | null = null;
  private seen = new Set<string>();

  constructor(public readonly sessionId: string) {}

  private admit(key: string): boolean {
    if (this.seen.has(key)) {
      return false;
    }
    this.seen.add(key);
    return true;
  }

  applyEvent(event: ChatEvent): void {
    this.inlineError = null;
    switch (event.type) {
      case "user":
        if (this.admit(`${event.turn}:user`)) {
          this.bubbles.push({ speaker: "user", text: event.text, turn: event.turn, badge: null, apiPanel: [] });
        }
        if (this.composer !== "ended") {
          this.composer = "working";
          this.status = "working";
        }
        break;
      case "clarify":
        if (this.admit(`${event.turn}:clarify`)) {
          this.bubbles.push({
            speaker: "assistant",
            text: event.text,
            turn: event.turn,
            badge: badgeFor(event.level ?? "supervisor", event.domain),
            apiPanel: [],
          });
        }
        if (this.composer !== "ended") {
          this.composer = "enabled";
          this.status = "awaiting_user";
        }
        break;
      case "respond":
        if (this.admit(`${event.turn}:respond`)) {
          this.bubbles.push({
            speaker: "assistant",
            text: event.text,
            turn: event.turn,
            badge: null,
            apiPanel: [],
          });
        }
        if (this.composer !== "ended") {
          this.composer = "enabled";
          this.status = "awaiting_user";
        }
        break;
      case "ended":
        if (this.admit("ended")) {
          this.bubbles.push({
            speaker: "notice",
            text: `session ended: ${event.text}`,
            turn: event.turn,
            badge: null,
            apiPanel: [],
          });
        }
        this.composer = "ended"; // permanent
        this.status = "ended";
        this.endedReason = event.text;
        break;
    }
  }

  /** Initial paint from GET transcript; later stream replay deduplicates. */
  applyBacklog(payload: TranscriptPayload): void {
    for (const message of payload.messages) {
      if (message.speaker === "user") {
        this.applyEvent({ type: "user", text: message.content, turn: message.turn });
      } else if (message.action?.tag === "clarify") {
        const level: ClarifyLevel = message.speaker === "supervisor" ? "supervisor" : "expert";
        this.applyEvent({
          type: "clarify",
          text: message.content,
          turn: message.turn,
          level,
          domain: message.domain ?? undefined,
        });
      } else if (message.action?.tag === "respond") {
        this.applyEvent({ type: "respond", text: message.content, turn: message.turn });
      }
      // route/api_call/environment records feed the api panel, not bubbles
    }
    this.attachApiPanels(payload);
    if (payload.status === "ended") {
      this.composer = "ended";
      this.status = "ended";
      this.endedReason = payload.terminated;
    } else {
      this.composer = payload.status === "working" ? "working" : "enabled";
      this.status = payload.status;
    }
  }

  /** Fold API calls/results into the collapsible panel of the bubble that follows them. */
  attachApiPanels(payload: TranscriptPayload): void {
    let pending: string[] = [];
    for (const message of payload.messages) {
      if (message.action?.tag === "api_call" || message.speaker === "environment") {
        pending.push(message.content);
      } else if (message.action?.tag === "clarify" || message.action?.tag === "respond") {
        if (pending.length) {
          const bubble = this.bubbles.find((b) => b.turn === message.turn);
          if (bubble) {
            bubble.apiPanel = pending;
          }
          pending = [];
        }
      } else if (message.speaker === "user") {
        pending = [];
      }
    }
  }

  /** Gate for the composer: exactly one in-flight user message. */
  beginSend(): void {
    if (this.composer === "ended") {
      throw new WrongStateError("the session has ended");
    }
    if (this.composer === "working") {
      throw new WrongStateError("a message is already in flight");
    }
    this.composer = "working";
    this.status = "working";
  }

  sendFailed(message: string): void {
    this.inlineError = message;
    if (this.composer !== "ended") {
      this.composer = "enabled";
      this.status = "awaiting_user";
    }
  }
}
