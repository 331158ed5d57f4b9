/**
 * Keyboard-to-protocol mapping, gated by the current stage so every emitted
 * message is legal by construction. Keys that mean nothing anywhere are
 * swallowed; keys that mean something in another stage produce a hint.
 *
 *   arrows / space   drive (demonstration) or override (while intervening)
 *   i                start/stop an intervention
 *   + / -            evaluative feedback
 *   n                advance to the next stage
 *   p                pause / resume
 */

import { ClientMessage, isStageLegal, validateClientMessage } from "./protocol.js";
import { UiState, inputsEnabled, stageOf } from "./state.js";

export const ACTION_KEYS: Record<string, number> = {
  ArrowUp: 0,
  ArrowDown: 1,
  ArrowLeft: 2,
  ArrowRight: 3,
  " ": 4,
};

export const FEEDBACK_KEYS: Record<string, 1 | -1> = {
  "+": 1,
  "=": 1,
  "-": -1,
  "_": -1,
};

export interface DispatchResult {
  message: ClientMessage | null;
  hint: string | null;
  /** local toggles the UI must apply when the message is sent */
  intervening?: boolean;
  paused?: boolean;
}

const IGNORED: DispatchResult = { message: null, hint: null };

function hint(text: string): DispatchResult {
  return { message: null, hint: text };
}

export function dispatchKey(key: string, state: UiState, now: () => number = Date.now): DispatchResult {
  if (!inputsEnabled(state)) {
    return IGNORED;
  }
  const stage = stageOf(state);
  const ts = now() / 1000;

  let result: DispatchResult = IGNORED;
  if (key in ACTION_KEYS) {
    const action = ACTION_KEYS[key];
    if (stage === "demonstration") {
      result = { message: { type: "demo_action", action, client_timestamp: ts }, hint: null };
    } else if (stage === "intervention" && state.intervening) {
      result = { message: { type: "override_action", action, client_timestamp: ts }, hint: null };
    } else if (stage === "intervention") {
      result = hint("press i to take control before steering");
    } else {
      result = hint(`driving keys are not available in the ${stage} stage`);
    }
  } else if (key === "i") {
    if (stage === "intervention") {
      const mode = state.intervening ? "stop" : "start";
      result = {
        message: { type: "intervene", mode, client_timestamp: ts },
        hint: null,
        intervening: !state.intervening,
      };
    } else {
      result = hint(`interventions are not available in the ${stage} stage`);
    }
  } else if (key in FEEDBACK_KEYS) {
    if (stage === "evaluation" || stage === "rl") {
      result = {
        message: { type: "feedback", value: FEEDBACK_KEYS[key], client_timestamp: ts },
        hint: null,
      };
    } else {
      result = hint(`feedback is not available in the ${stage} stage`);
    }
  } else if (key === "n") {
    result = { message: { type: "advance_stage", client_timestamp: ts }, hint: null };
  } else if (key === "p") {
    result = {
      message: { type: state.paused ? "resume" : "pause", client_timestamp: ts },
      hint: null,
      paused: !state.paused,
    };
  }

  if (result.message !== null) {
    // both checks hold by construction; guard against future keymap edits
    if (validateClientMessage(result.message) !== null || !isStageLegal(result.message, stage)) {
      return hint("internal keymap error; input dropped");
    }
  }
  return result;
}
