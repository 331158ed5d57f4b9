/**
 * Wire protocol types and validators, mirroring docs/protocol.md (version 1).
 * Everything the client sends passes through validateClientMessage, so a
 * malformed message cannot leave the process.
 */

export const PROTOCOL_VERSION = 1;

export type Stage = "demonstration" | "intervention" | "evaluation" | "rl";

export interface PredatorCell {
  x: number;
  y: number;
  learner: boolean;
}

export interface PreyCell {
  x: number;
  y: number;
  alive: boolean;
}

export interface FrameMessage {
  type: "frame";
  protocol_version: number;
  session_id: string;
  tick: number;
  stage: Stage;
  episode: number;
  step: number;
  grid: {
    width: number;
    height: number;
    hazards: [number, number][];
    predators: PredatorCell[];
    prey: PreyCell[];
  };
  agent_proposed_action: number | null;
  controller: "agent" | "human";
  last_episode_score: number | null;
  counters: { demos: number; interventions: number; feedback: number };
}

export interface HelloMessage {
  type: "hello";
  protocol_version: number;
  session_id: string;
  role: "controller" | "spectator";
  tick_ms: number;
}

export interface ErrorMessage {
  type: "error";
  protocol_version: number;
  message: string;
}

export interface DoneMessage {
  type: "done";
  protocol_version: number;
}

export type ServerMessage = FrameMessage | HelloMessage | ErrorMessage | DoneMessage;

export type ClientMessage =
  | { type: "hello"; protocol_version: number }
  | { type: "demo_action"; action: number; client_timestamp: number }
  | { type: "intervene"; mode: "start" | "stop"; client_timestamp: number }
  | { type: "override_action"; action: number; client_timestamp: number }
  | { type: "feedback"; value: 1 | -1; client_timestamp: number }
  | { type: "advance_stage"; client_timestamp: number }
  | { type: "pause"; client_timestamp: number }
  | { type: "resume"; client_timestamp: number };

export const STAGES: Stage[] = ["demonstration", "intervention", "evaluation", "rl"];

/** Message kinds each stage consumes; hello/pause/resume are stage-free. */
export const STAGE_LEGAL: Record<Stage, Set<string>> = {
  demonstration: new Set(["demo_action", "advance_stage"]),
  intervention: new Set(["intervene", "override_action", "advance_stage"]),
  evaluation: new Set(["feedback", "advance_stage"]),
  rl: new Set(["feedback", "advance_stage"]),
};

export function validateClientMessage(msg: ClientMessage): string | null {
  switch (msg.type) {
    case "hello":
      return msg.protocol_version === PROTOCOL_VERSION
        ? null
        : `protocol version must be ${PROTOCOL_VERSION}`;
    case "demo_action":
    case "override_action":
      return Number.isInteger(msg.action) && msg.action >= 0 && msg.action <= 4
        ? null
        : "action must be an integer in 0..4";
    case "intervene":
      return msg.mode === "start" || msg.mode === "stop"
        ? null
        : "intervene mode must be start or stop";
    case "feedback":
      return msg.value === 1 || msg.value === -1 ? null : "feedback value must be +1 or -1";
    case "advance_stage":
    case "pause":
    case "resume":
      return null;
    default:
      return "unknown message type";
  }
}

export function isStageLegal(msg: ClientMessage, stage: Stage | null): boolean {
  if (msg.type === "hello" || msg.type === "pause" || msg.type === "resume") {
    return true;
  }
  if (stage === null) {
    return false;
  }
  return STAGE_LEGAL[stage].has(msg.type);
}

export function parseServerMessage(raw: string): ServerMessage | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) {
    return null;
  }
  const msg = doc as Record<string, unknown>;
  if (
    msg.type === "frame" ||
    msg.type === "hello" ||
    msg.type === "error" ||
    msg.type === "done"
  ) {
    return doc as ServerMessage;
  }
  return null;
}
