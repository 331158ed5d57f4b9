import { FrameMessage, Stage } from "../src/protocol.js";
import { applyServerMessage, initialState, UiState } from "../src/state.js";

export function makeFrame(partial: Partial<FrameMessage> = {}): FrameMessage {
  return {
    type: "frame",
    protocol_version: 1,
    session_id: "test",
    tick: 0,
    stage: "demonstration",
    episode: 0,
    step: 0,
    grid: {
      width: 6,
      height: 6,
      hazards: [[3, 1]],
      predators: [
        { x: 0, y: 0, learner: true },
        { x: 0, y: 2, learner: false },
        { x: 0, y: 4, learner: false },
      ],
      prey: [{ x: 5, y: 5, alive: true }],
    },
    agent_proposed_action: null,
    controller: "human",
    last_episode_score: null,
    counters: { demos: 0, interventions: 0, feedback: 0 },
    ...partial,
  };
}

export function connectedState(stage: Stage, extra: Partial<UiState> = {}): UiState {
  let state = initialState();
  state = applyServerMessage(state, {
    type: "hello",
    protocol_version: 1,
    session_id: "test",
    role: "controller",
    tick_ms: 25,
  });
  state = applyServerMessage(state, makeFrame({ stage }));
  return { ...state, ...extra };
}
