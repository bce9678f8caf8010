// Wire schema of the dialogue service. The UI renders these fields verbatim
// and never re-classifies anything on the client side.

export type ClarifyLevel = "supervisor" | "expert";

export interface ChatEvent {
  type: "user" | "clarify" | "respond" | "ended";
  text: string;
  turn: number;
  level?: ClarifyLevel;
  domain?: string;
}

export interface TranscriptMessage {
  speaker: "user" | "supervisor" | "expert" | "environment" | "judge";
  content: string;
  turn: number;
  action: { tag: string; [key: string]: unknown } | null;
  clarification: { level: ClarifyLevel; kind: string } | null;
  domain: string | null;
}

export interface TranscriptPayload {
  id: string;
  status: "awaiting_user" | "working" | "ended";
  terminated: string | null;
  mode: string;
  messages: TranscriptMessage[];
}

export interface SessionInfo {
  id: string;
  status: string;
}

export type RunMode = "no_clarify" | "expert_only" | "supervisor_only" | "both";

export interface SessionConfig {
  mode: RunMode;
  backends: Record<string, string>;
  max_exchanges?: number;
  seed?: number;
}
