// Canvas drawing for the session view: grayscale scene, red gripper bar,
// yellow contact dots, and the green/red history strip.

import { ClientSession } from "./session.js";

export interface PgmImage {
  w: number;
  h: number;
  data: Uint8Array;
}

function b64ToBytes(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  // node (tests)
  return new Uint8Array(Buffer.from(b64, "base64"));
}

/** Parse a binary PGM (P5, maxval 255) from its base64 bytes. */
export function decodePgm(b64: string): PgmImage {
  const bytes = b64ToBytes(b64);
  // header: "P5\n{w} {h}\n255\n"
  let pos = 0;
  const readLine = () => {
    let end = pos;
    while (end < bytes.length && bytes[end] !== 0x0a) end++;
    const line = new TextDecoder().decode(bytes.subarray(pos, end));
    pos = end + 1;
    return line;
  };
  const magic = readLine();
  if (magic !== "P5") throw new Error(`not a P5 PGM: ${magic}`);
  const [w, h] = readLine().split(" ").map(Number);
  const maxval = Number(readLine());
  if (!w || !h || maxval !== 255) throw new Error("bad PGM header");
  return { w, h, data: bytes.subarray(pos, pos + w * h) };
}

const SCALE = 6; // 64 px scene -> 384 px canvas

export function draw(canvas: HTMLCanvasElement, session: ClientSession): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.fillStyle = "#111";
  ctx.fillRect(0, 0, canvas.width, canvas.height);

  const state = session.lastState;
  if (state) {
    const img = decodePgm(state.image.b64);
    const cell = SCALE;
    for (let y = 0; y < img.h; y++) {
      for (let x = 0; x < img.w; x++) {
        const v = img.data[y * img.w + x];
        if (v > 0) {
          ctx.fillStyle = `rgb(${v},${v},${v})`;
          ctx.fillRect(x * cell, y * cell, cell, cell);
        }
      }
    }
    // open gripper bar in red
    const [a, b] = state.overlay.bar;
    ctx.strokeStyle = "#e33";
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.moveTo(a[0] * cell, a[1] * cell);
    ctx.lineTo(b[0] * cell, b[1] * cell);
    ctx.stroke();
    // grasping points in yellow
    ctx.fillStyle = "#fd0";
    for (const [cx, cy] of state.overlay.contacts) {
      ctx.beginPath();
      ctx.arc(cx * cell, cy * cell, 5, 0, 2 * Math.PI);
      ctx.fill();
    }
  }

  // history strip: green = robot withstood, red = snatched
  const stripY = canvas.height - 18;
  session.history.forEach((entry, i) => {
    ctx.fillStyle = entry.withstood ? "#2a2" : "#c22";
    ctx.fillRect(4 + i * 12, stripY, 10, 12);
  });

  ctx.fillStyle = "#eee";
  ctx.font = "14px monospace";
  const ep = state ? state.episode_id : "-";
  ctx.fillText(`episode ${ep}  phase ${session.phase}`, 6, 16);
  if (session.banner) {
    ctx.fillStyle = "#f80";
    ctx.fillText(session.banner, 6, 34);
  }
}
