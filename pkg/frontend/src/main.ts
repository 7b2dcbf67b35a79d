// Browser entry point: WebSocket transport, keyboard/button input, canvas.

import { Direction, DIRECTIONS } from "./protocol.js";
import { ClientSession } from "./session.js";
import { draw } from "./render.js";

const KEY_MAP: Record<string, Direction> = {
  ArrowRight: "POS_X",
  ArrowLeft: "NEG_X",
  ArrowUp: "POS_Y",   // inwards, toward the robot
  ArrowDown: "NEG_Y", // outwards
  KeyW: "UP",
  KeyS: "DOWN",
};

const BUTTON_LABELS: Record<Direction, string> = {
  POS_X: "right →",
  NEG_X: "← left",
  POS_Y: "inward ↑",
  NEG_Y: "outward ↓",
  UP: "lift (W)",
  DOWN: "press (S)",
};

function serverUrl(): string {
  const params = new URLSearchParams(location.search);
  const explicit = params.get("server");
  if (explicit) return explicit;
  const proto = location.protocol === "https:" ? "wss" : "ws";
  const host = location.hostname || "127.0.0.1"; // file:// has no hostname
  return `${proto}://${host}:${params.get("port") ?? "8765"}`;
}

function setup(): void {
  const canvas = document.getElementById("scene") as HTMLCanvasElement;
  const controls = document.getElementById("controls") as HTMLDivElement;

  let ws: WebSocket;
  const session = new ClientSession((msg) => ws.send(JSON.stringify(msg)));
  const buttons = new Map<Direction, HTMLButtonElement>();

  for (const d of DIRECTIONS) {
    const btn = document.createElement("button");
    btn.textContent = BUTTON_LABELS[d];
    btn.onclick = () => session.submitAction(d);
    controls.appendChild(btn);
    buttons.set(d, btn);
  }

  document.addEventListener("keydown", (ev) => {
    const d = KEY_MAP[ev.code];
    if (d) {
      session.submitAction(d);
      ev.preventDefault();
    }
  });

  const refresh = () => {
    const enabled = session.controlsEnabled();
    for (const btn of buttons.values()) btn.disabled = !enabled;
    draw(canvas, session);
    requestAnimationFrame(refresh);
  };
  requestAnimationFrame(refresh);

  const connect = () => {
    ws = new WebSocket(serverUrl());
    ws.onopen = () => session.start();
    ws.onmessage = (ev) => session.handleMessage(String(ev.data));
    ws.onclose = () => {
      if (!session.ended) {
        session.banner = "disconnected, retrying...";
        setTimeout(connect, 1000); // server re-issues any pending request
      }
    };
  };
  connect();
}

setup();
