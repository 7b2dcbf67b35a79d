// Client session state machine. Transport-agnostic: messages come in via
// handleMessage, outgoing messages leave through the injected send
// function. All rendering reads this state; no DOM access here.

import {
  ActionRequestMsg,
  ClientMsg,
  Direction,
  ServerMsg,
  StateUpdateMsg,
} from "./protocol.js";

export interface HistoryEntry {
  episodeId: number;
  direction: Direction;
  withstood: boolean;
}

export class ClientSession {
  lastState: StateUpdateMsg | null = null;
  pendingRequest: ActionRequestMsg | null = null;
  awaitingOutcome = false;
  history: HistoryEntry[] = [];
  banner: string | null = null;
  phase = "CONNECTING";
  progress = { batch: 0, episodes_done: 0, snatch_count: 0 };
  summary: Record<string, unknown> | null = null;
  ended = false;

  private lastDirection: Direction | null = null;

  constructor(private send: (msg: ClientMsg) => void) {}

  /** Announce ourselves; must be the first message on a fresh connection. */
  start(): void {
    this.send({ type: "hello", protocol_version: 1 });
  }

  /** True while the six disturbance controls should accept input. */
  controlsEnabled(): boolean {
    return this.pendingRequest !== null && !this.awaitingOutcome && !this.ended;
  }

  /** Keyboard or button input; ignored unless a request is open. */
  submitAction(direction: Direction): boolean {
    if (!this.controlsEnabled()) {
      this.banner = "no action pending";
      return false;
    }
    this.send({
      type: "human_action",
      request_id: this.pendingRequest!.request_id,
      direction,
    });
    this.lastDirection = direction;
    this.awaitingOutcome = true; // one action per request
    return true;
  }

  handleMessage(raw: string): void {
    let msg: ServerMsg;
    try {
      msg = JSON.parse(raw) as ServerMsg;
      if (typeof msg !== "object" || msg === null || !("type" in msg)) {
        throw new Error("not a message object");
      }
    } catch {
      this.banner = "malformed message from server";
      return; // connection retained
    }
    switch (msg.type) {
      case "hello":
        this.phase = "CONNECTED";
        this.banner = null;
        break;
      case "state_update":
        this.lastState = msg;
        this.phase = msg.phase;
        this.banner = msg.grasp_success ? null : "robot failed to grasp";
        break;
      case "action_request":
        // a re-issued request (reconnect, stale answer) reopens input
        this.pendingRequest = msg;
        this.awaitingOutcome = false;
        break;
      case "outcome": {
        if (this.pendingRequest && this.lastState &&
            msg.request_id === this.pendingRequest.request_id &&
            this.lastDirection !== null) {
          this.history.push({
            episodeId: this.lastState.episode_id,
            direction: this.lastDirection,
            withstood: msg.withstood,
          });
        }
        this.pendingRequest = null;
        this.awaitingOutcome = false;
        this.lastDirection = null;
        break;
      }
      case "progress":
        this.progress = {
          batch: msg.batch,
          episodes_done: msg.episodes_done,
          snatch_count: msg.snatch_count,
        };
        break;
      case "session_end":
        this.summary = msg.summary;
        this.ended = true;
        this.phase = "DONE";
        this.pendingRequest = null;
        break;
      case "error":
        this.banner = `server: ${msg.code}`;
        break;
      default:
        this.banner = "unknown message type";
    }
  }
}
