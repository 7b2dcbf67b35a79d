import { describe, expect, it } from "vitest";

import { ClientMsg } from "../src/protocol.js";
import { ClientSession } from "../src/session.js";
import { decodePgm } from "../src/render.js";

function makeSession() {
  const sent: ClientMsg[] = [];
  const session = new ClientSession((m) => sent.push(m));
  return { session, sent };
}

const stateUpdate = (episode: number, success = true) =>
  JSON.stringify({
    type: "state_update",
    episode_id: episode,
    phase: "TRAINING",
    image: { w: 2, h: 2, b64: Buffer.from("P5\n2 2\n255\n\xff\x00\x00\xff", "latin1").toString("base64") },
    grasp: { x: 0.01, y: -0.02, theta: 1.2 },
    grasp_success: success,
    overlay: { bar: [[10, 20], [30, 40]], contacts: [[15, 25], [22, 33]] },
  });

const actionRequest = (id: number) =>
  JSON.stringify({ type: "action_request", request_id: id,
                   directions: ["POS_X", "NEG_X", "POS_Y", "NEG_Y", "UP", "DOWN"],
                   magnitude: 3.0 });

const outcome = (id: number, withstood: boolean) =>
  JSON.stringify({ type: "outcome", request_id: id, withstood, reward: withstood ? 1 : 0.5 });

describe("ClientSession", () => {
  it("emits only hello and human_action", () => {
    const { session, sent } = makeSession();
    session.start();
    session.handleMessage(stateUpdate(0));
    session.handleMessage(actionRequest(0));
    session.submitAction("UP");
    session.handleMessage(outcome(0, true));
    session.handleMessage(JSON.stringify({ type: "session_end", summary: {} }));
    const kinds = new Set(sent.map((m) => m.type));
    expect([...kinds].sort()).toEqual(["hello", "human_action"]);
  });

  it("completes a scripted ten-episode session, one action per request", () => {
    const { session, sent } = makeSession();
    session.start();
    let outcomes = 0;
    for (let ep = 0; ep < 10; ep++) {
      const success = ep % 3 !== 2; // a couple of failed grasps mixed in
      session.handleMessage(stateUpdate(ep, success));
      if (!success) {
        expect(session.controlsEnabled()).toBe(false);
        expect(session.banner).toMatch(/failed/);
        continue;
      }
      session.handleMessage(actionRequest(ep));
      expect(session.controlsEnabled()).toBe(true);
      expect(session.submitAction("POS_X")).toBe(true);
      // double press before the outcome is ignored
      expect(session.submitAction("NEG_X")).toBe(false);
      session.handleMessage(outcome(ep, ep % 2 === 0));
      outcomes++;
    }
    session.handleMessage(JSON.stringify({ type: "session_end", summary: { done: true } }));
    expect(session.ended).toBe(true);
    // history strip length equals outcomes received
    expect(session.history.length).toBe(outcomes);
    const actions = sent.filter((m) => m.type === "human_action");
    expect(actions.length).toBe(outcomes);
    // colors: withstood flag preserved per entry
    expect(session.history.every((h, i) => typeof h.withstood === "boolean")).toBe(true);
  });

  it("ignores input with no pending request", () => {
    const { session, sent } = makeSession();
    session.start();
    session.handleMessage(stateUpdate(0));
    expect(session.submitAction("UP")).toBe(false);
    expect(sent.filter((m) => m.type === "human_action")).toHaveLength(0);
    expect(session.banner).toMatch(/no action pending/);
  });

  it("keeps the connection on malformed messages", () => {
    const { session } = makeSession();
    session.start();
    session.handleMessage("{not json");
    expect(session.banner).toMatch(/malformed/);
    session.handleMessage(stateUpdate(3));
    expect(session.lastState?.episode_id).toBe(3);
  });

  it("re-issued request reopens the controls", () => {
    const { session, sent } = makeSession();
    session.start();
    session.handleMessage(stateUpdate(1));
    session.handleMessage(actionRequest(5));
    session.submitAction("DOWN");
    expect(session.controlsEnabled()).toBe(false);
    // server did not see the answer (reconnect) and re-issues
    session.handleMessage(actionRequest(5));
    expect(session.controlsEnabled()).toBe(true);
    session.submitAction("DOWN");
    const answers = sent.filter((m) => m.type === "human_action");
    expect(answers).toHaveLength(2);
    session.handleMessage(outcome(5, false));
    expect(session.history).toHaveLength(1);
    expect(session.history[0].withstood).toBe(false);
  });

  it("surfaces server errors in the banner", () => {
    const { session } = makeSession();
    session.handleMessage(JSON.stringify({ type: "error", code: "STALE_REQUEST" }));
    expect(session.banner).toBe("server: STALE_REQUEST");
  });
});

describe("decodePgm", () => {
  it("parses the header and pixel bytes", () => {
    const b64 = Buffer.from("P5\n2 2\n255\n\x00\x7f\xff\x01", "latin1").toString("base64");
    const img = decodePgm(b64);
    expect(img.w).toBe(2);
    expect(img.h).toBe(2);
    expect([...img.data]).toEqual([0, 127, 255, 1]);
  });

  it("rejects non-PGM payloads", () => {
    const b64 = Buffer.from("JUNK").toString("base64");
    expect(() => decodePgm(b64)).toThrow();
  });
});
