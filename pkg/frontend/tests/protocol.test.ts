import { describe, expect, it } from "vitest";

import {
  isStageLegal,
  parseServerMessage,
  validateClientMessage,
} from "../src/protocol.js";

describe("validateClientMessage", () => {
  it("accepts the documented shapes", () => {
    expect(validateClientMessage({ type: "hello", protocol_version: 1 })).toBeNull();
    expect(
      validateClientMessage({ type: "demo_action", action: 4, client_timestamp: 0 }),
    ).toBeNull();
    expect(
      validateClientMessage({ type: "feedback", value: -1, client_timestamp: 0 }),
    ).toBeNull();
  });

  it("rejects out-of-range and malformed fields", () => {
    expect(
      validateClientMessage({ type: "demo_action", action: 5, client_timestamp: 0 }),
    ).toContain("0..4");
    expect(
      validateClientMessage({ type: "demo_action", action: 1.5, client_timestamp: 0 }),
    ).toContain("0..4");
    expect(validateClientMessage({ type: "hello", protocol_version: 3 })).toContain("1");
    expect(
      validateClientMessage({ type: "feedback", value: 2 as never, client_timestamp: 0 }),
    ).toContain("+1 or -1");
  });
});

describe("stage legality", () => {
  it("feedback is legal in evaluation and rl only", () => {
    const msg = { type: "feedback", value: 1, client_timestamp: 0 } as const;
    expect(isStageLegal(msg, "evaluation")).toBe(true);
    expect(isStageLegal(msg, "rl")).toBe(true);
    expect(isStageLegal(msg, "demonstration")).toBe(false);
    expect(isStageLegal(msg, "intervention")).toBe(false);
  });

  it("nothing but stage-free kinds is legal before the first frame", () => {
    expect(isStageLegal({ type: "hello", protocol_version: 1 }, null)).toBe(true);
    expect(
      isStageLegal({ type: "demo_action", action: 0, client_timestamp: 0 }, null),
    ).toBe(false);
  });
});

describe("parseServerMessage", () => {
  it("round-trips the four server kinds", () => {
    for (const doc of [
      { type: "hello", protocol_version: 1, session_id: "s", role: "controller", tick_ms: 25 },
      { type: "error", protocol_version: 1, message: "nope" },
      { type: "done", protocol_version: 1 },
    ]) {
      expect(parseServerMessage(JSON.stringify(doc))).toMatchObject({ type: doc.type });
    }
  });

  it("returns null on garbage", () => {
    expect(parseServerMessage("{{{{")).toBeNull();
    expect(parseServerMessage('"a string"')).toBeNull();
    expect(parseServerMessage('{"type": "unknown"}')).toBeNull();
  });
});
