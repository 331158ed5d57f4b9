/**
 * Client-side view state. Nothing here predicts the environment: the grid,
 * counters, and controller always come from the last server frame. The only
 * local flags are connection status, the intervene toggle (echoed back by
 * the server one tick later), and the rolling histories for the plots.
 */

import { FrameMessage, ServerMessage, Stage, PROTOCOL_VERSION } from "./protocol.js";

export type Connection =
  | "connecting"
  | "connected"
  | "version-mismatch"
  | "disconnected";

export interface FeedbackMark {
  tick: number;
  count: number;
}

export interface UiState {
  connection: Connection;
  sessionId: string | null;
  frame: FrameMessage | null;
  intervening: boolean;
  paused: boolean;
  hint: string | null;
  lastError: string | null;
  done: boolean;
  scoreHistory: number[];
  feedbackMarks: FeedbackMark[];
}

export function initialState(): UiState {
  return {
    connection: "connecting",
    sessionId: null,
    frame: null,
    intervening: false,
    paused: false,
    hint: null,
    lastError: null,
    done: false,
    scoreHistory: [],
    feedbackMarks: [],
  };
}

const SCORE_WINDOW = 200;

export function applyServerMessage(state: UiState, msg: ServerMessage): UiState {
  switch (msg.type) {
    case "hello": {
      if (msg.protocol_version !== PROTOCOL_VERSION) {
        return { ...state, connection: "version-mismatch", sessionId: msg.session_id };
      }
      return { ...state, connection: "connected", sessionId: msg.session_id };
    }
    case "frame": {
      const prev = state.frame;
      let scoreHistory = state.scoreHistory;
      if (
        msg.last_episode_score !== null &&
        (prev === null || msg.episode !== prev.episode)
      ) {
        scoreHistory = [...scoreHistory, msg.last_episode_score].slice(-SCORE_WINDOW);
      }
      let feedbackMarks = state.feedbackMarks;
      if (prev !== null && msg.counters.feedback > prev.counters.feedback) {
        feedbackMarks = [
          ...feedbackMarks,
          { tick: msg.tick, count: msg.counters.feedback },
        ].slice(-SCORE_WINDOW);
      }
      // the server ends interventions implicitly when the stage moves on
      const intervening = msg.stage === "intervention" ? state.intervening : false;
      return { ...state, frame: msg, scoreHistory, feedbackMarks, intervening, hint: null };
    }
    case "error":
      return { ...state, lastError: msg.message };
    case "done":
      return { ...state, done: true };
  }
}

export function stageOf(state: UiState): Stage | null {
  return state.frame === null ? null : state.frame.stage;
}

export function inputsEnabled(state: UiState): boolean {
  return state.connection === "connected" && !state.done;
}
