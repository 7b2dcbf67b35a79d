"""Live training session service and log replay.

One server hosts one session for one controlling client. Messages are
newline-delimited JSON; a client may instead open the same port with an
HTTP WebSocket upgrade (for browsers), in which case each text frame
carries one JSON message. Message types:

  hello          both ways; server's copy carries the session config
  state_update   server: scene image (base64 PGM), grasp, overlay
  action_request server: request_id, legal directions, force magnitude
  human_action   client: request_id + chosen direction
  outcome        server: withstood flag and episode reward
  progress       server: after each batch
  session_end    server: summary counters
  error          server: code + detail (e.g. STALE_REQUEST)

Turn-taking is strict: exactly one action_request is outstanding at a time
and the training loop blocks until it is answered. If the client drops, the
session pauses; on reconnect the last state_update and the pending request
are re-sent.
"""

from __future__ import annotations

import base64
import hashlib
import json
import queue
import socket
import struct
import threading
from typing import Optional

from .adversary import AdversaryKind
from .config import RunConfig
from .errors import (BindFailureError, ChannelClosedError, HumanTimeoutError,
                     ParseError, VersionMismatchError)
from .geometry import ObjectShape, Pose2
from .imaging import extract_patch, to_pgm
from .physics import (Direction, DisturbanceAction, GraspAction,
                      apply_disturbance, attempt_grasp)
from .policy import compute_reward
from .trainer import EpisodeView, EpisodeRecord, TrainObserver, render_scene_cached, train

PROTOCOL_VERSION = 1
_WS_GUID = b"258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

SESSION_PHASES = ("WARMUP", "TRAINING", "WAITING_FOR_HUMAN", "EVAL", "DONE")


# ---------------------------------------------------------------------------
# transport
# ---------------------------------------------------------------------------

class MessageChannel:
    """One JSON message per line (raw socket) or per text frame (WebSocket)."""

    def __init__(self, sock: socket.socket, websocket: bool = False):
        self.sock = sock
        self.websocket = websocket
        self._buf = b""
        self._send_lock = threading.Lock()

    def send(self, obj: dict) -> None:
        data = json.dumps(obj, separators=(",", ":")).encode("utf-8")
        with self._send_lock:
            if self.websocket:
                self.sock.sendall(_ws_frame(data))
            else:
                self.sock.sendall(data + b"\n")

    def recv(self) -> Optional[dict]:
        """Next message, or None on a closed connection."""
        if self.websocket:
            payload = _ws_read_message(self.sock)
            return None if payload is None else json.loads(payload)
        while b"\n" not in self._buf:
            chunk = self.sock.recv(65536)
            if not chunk:
                return None
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        if not line.strip():
            return self.recv()
        return json.loads(line)

    def close(self) -> None:
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


def _ws_frame(payload: bytes, opcode: int = 0x1) -> bytes:
    n = len(payload)
    head = bytes([0x80 | opcode])
    if n < 126:
        head += bytes([n])
    elif n < 1 << 16:
        head += bytes([126]) + struct.pack(">H", n)
    else:
        head += bytes([127]) + struct.pack(">Q", n)
    return head + payload


def _recv_exact(sock: socket.socket, n: int) -> Optional[bytes]:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


def _ws_read_message(sock: socket.socket) -> Optional[bytes]:
    """One unfragmented client frame; answers pings, None on close."""
    while True:
        head = _recv_exact(sock, 2)
        if head is None:
            return None
        opcode = head[0] & 0x0F
        masked = bool(head[1] & 0x80)
        n = head[1] & 0x7F
        if n == 126:
            ext = _recv_exact(sock, 2)
            if ext is None:
                return None
            n = struct.unpack(">H", ext)[0]
        elif n == 127:
            ext = _recv_exact(sock, 8)
            if ext is None:
                return None
            n = struct.unpack(">Q", ext)[0]
        mask = b"\x00" * 4
        if masked:
            mask = _recv_exact(sock, 4)
            if mask is None:
                return None
        payload = _recv_exact(sock, n) if n else b""
        if payload is None:
            return None
        if masked:
            payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        if opcode == 0x8:  # close
            return None
        if opcode == 0x9:  # ping -> pong
            sock.sendall(_ws_frame(payload, opcode=0xA))
            continue
        if opcode in (0x1, 0x2):
            return payload


def _ws_handshake(sock: socket.socket, first: bytes) -> bool:
    """Complete the server side of an HTTP upgrade; `first` is peeked data."""
    data = first
    while b"\r\n\r\n" not in data:
        chunk = sock.recv(4096)
        if not chunk:
            return False
        data += chunk
    headers = {}
    for line in data.split(b"\r\n")[1:]:
        if b":" in line:
            k, v = line.split(b":", 1)
            headers[k.strip().lower()] = v.strip()
    key = headers.get(b"sec-websocket-key")
    if key is None:
        return False
    accept = base64.b64encode(hashlib.sha1(key + _WS_GUID).digest())
    sock.sendall(b"HTTP/1.1 101 Switching Protocols\r\n"
                 b"Upgrade: websocket\r\n"
                 b"Connection: Upgrade\r\n"
                 b"Sec-WebSocket-Accept: " + accept + b"\r\n\r\n")
    return True


def accept_channel(sock: socket.socket) -> Optional[MessageChannel]:
    """Wrap a freshly accepted socket; sniffs WebSocket vs raw NDJSON."""
    first = sock.recv(4, socket.MSG_PEEK)
    if first.startswith(b"GET"):
        request = sock.recv(65536)
        if not _ws_handshake(sock, request):
            sock.close()
            return None
        return MessageChannel(sock, websocket=True)
    return MessageChannel(sock, websocket=False)


# ---------------------------------------------------------------------------
# server
# ---------------------------------------------------------------------------

class SessionServer(TrainObserver):
    """Hosts one human-adversary training session on a listening socket."""

    def __init__(self, cfg: RunConfig, bind=("127.0.0.1", 0),
                 out_dir: Optional[str] = None,
                 human_timeout: Optional[float] = None):
        if AdversaryKind(cfg.train.adversary) != AdversaryKind.HUMAN:
            raise ValueError("serve() needs a config with adversary 'human'")
        self.cfg = cfg
        self.out_dir = out_dir
        self.human_timeout = human_timeout
        try:
            self._listener = socket.create_server(bind)
        except OSError as e:
            raise BindFailureError(f"cannot bind {bind}: {e}") from e
        self.address = self._listener.getsockname()
        self._inbox: queue.Queue = queue.Queue()
        self._client: Optional[MessageChannel] = None
        self._client_cond = threading.Condition()
        self._stopping = False
        self._next_request_id = 0
        self._pending_request: Optional[dict] = None
        self._pending_request_id: Optional[int] = None
        self._last_state: Optional[dict] = None
        self.phase = "WARMUP"
        self.counters = {"episodes_done": 0, "snatches": 0, "withstands": 0}
        self.summary: Optional[dict] = None
        self._acceptor = threading.Thread(target=self._accept_loop, daemon=True)

    # -- client management --------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._stopping:
            try:
                sock, _ = self._listener.accept()
            except OSError:
                return
            sock.settimeout(10.0)  # bound the handshake; cleared once greeted
            try:
                channel = accept_channel(sock)
            except OSError:
                sock.close()
                continue
            if channel is None:
                continue
            with self._client_cond:
                if self._client is not None:
                    try:
                        channel.send({"type": "error", "code": "BUSY",
                                      "detail": "session already has a client"})
                        channel.close()
                    except OSError:
                        pass
                    continue
                if not self._greet(channel):
                    channel.close()
                    continue
                channel.sock.settimeout(None)
                self._client = channel
                self._client_cond.notify_all()
            threading.Thread(target=self._reader_loop, args=(channel,),
                             daemon=True).start()
            # refresh a reconnecting client
            if self._last_state is not None:
                self._send(self._last_state)
            if self._pending_request is not None:
                self._send(self._pending_request)

    def _greet(self, channel: MessageChannel) -> bool:
        try:
            msg = channel.recv()
            if msg is None or msg.get("type") != "hello":
                return False
            channel.send({"type": "hello", "protocol_version": PROTOCOL_VERSION,
                          "session_config": self.cfg.to_dict()})
            return True
        except (OSError, json.JSONDecodeError):
            return False

    def _reader_loop(self, channel: MessageChannel) -> None:
        while True:
            try:
                msg = channel.recv()
            except (OSError, json.JSONDecodeError):
                msg = None
            if msg is None:
                with self._client_cond:
                    if self._client is channel:
                        self._client = None
                return
            self._inbox.put(msg)

    def _send(self, obj: dict) -> None:
        """Deliver to the controlling client, pausing while disconnected."""
        while True:
            with self._client_cond:
                while self._client is None:
                    if self._stopping:
                        raise ChannelClosedError("session stopping with no client")
                    self._client_cond.wait(timeout=0.5)
                channel = self._client
            try:
                channel.send(obj)
                return
            except OSError:
                with self._client_cond:
                    if self._client is channel:
                        self._client = None

    # -- human action channel (used by HumanAdversary) ----------------------

    def request_action(self, magnitude: float, timeout: Optional[float] = None) -> Direction:
        request_id = self._next_request_id
        self._next_request_id += 1
        request = {"type": "action_request", "request_id": request_id,
                   "directions": [d.name for d in Direction],
                   "magnitude": magnitude}
        self._pending_request = request
        self.phase = "WAITING_FOR_HUMAN"
        self._send(request)
        effective = timeout if timeout is not None else self.human_timeout
        while True:
            try:
                msg = self._inbox.get(timeout=effective)
            except queue.Empty:
                self._pending_request = None
                self.phase = "TRAINING"
                raise HumanTimeoutError(f"no answer to request {request_id}")
            if msg.get("type") != "human_action":
                self._send({"type": "error", "code": "UNEXPECTED_TYPE",
                            "detail": f"got {msg.get('type')!r}"})
                continue
            if msg.get("request_id") != request_id:
                self._send({"type": "error", "code": "STALE_REQUEST",
                            "detail": f"open request is {request_id}"})
                self._send(request)
                continue
            try:
                direction = Direction[msg["direction"]]
            except (KeyError, TypeError):
                self._send({"type": "error", "code": "BAD_DIRECTION",
                            "detail": str(msg.get("direction"))})
                self._send(request)
                continue
            self._pending_request_id = request_id
            self._pending_request = None
            self.phase = "TRAINING"
            return direction

    # -- trainer observer hooks ---------------------------------------------

    def on_state(self, view: EpisodeView) -> None:
        self.phase = "WARMUP" if view.phase == "WARMUP" else "TRAINING"
        pgm = to_pgm(view.image.pixels)
        msg = {"type": "state_update",
               "episode_id": view.episode_id,
               "phase": self.phase,
               "image": {"w": view.image.width, "h": view.image.height,
                         "b64": base64.b64encode(pgm).decode("ascii")},
               "grasp": {"x": view.grasp.x_g, "y": view.grasp.y_g,
                         "theta": view.grasp.theta_g},
               "grasp_success": view.grasp_success,
               "overlay": view.overlay}
        self._last_state = msg
        self._send(msg)

    def on_outcome(self, record: EpisodeRecord) -> None:
        self.counters["episodes_done"] += 1
        if record.adversary_action is not None:
            if record.adversary_success:
                self.counters["snatches"] += 1
            else:
                self.counters["withstands"] += 1
            self._send({"type": "outcome",
                        "request_id": self._pending_request_id,
                        "withstood": not record.adversary_success,
                        "reward": record.reward.total})

    def on_batch(self, batch_idx: int, episodes_done: int, snatch_count: int) -> None:
        self._send({"type": "progress", "batch": batch_idx,
                    "episodes_done": episodes_done,
                    "snatch_count": snatch_count})

    # -- main entry ----------------------------------------------------------

    def serve(self) -> dict:
        """Run warm-up plus training, streaming to the client; returns the
        summary after session_end."""
        self._acceptor.start()
        try:
            result = train(self.cfg, out_dir=self.out_dir, observer=self,
                           human_channel=self, human_timeout=self.human_timeout)
            self.phase = "DONE"
            self.summary = {
                "episodes": len(result.records),
                "snatches": self.counters["snatches"],
                "withstands": self.counters["withstands"],
                "aborted": result.aborted,
                "log_path": result.log_path,
                "checkpoints": len(result.checkpoints),
            }
            self._send({"type": "session_end", "summary": self.summary})
        finally:
            self._stopping = True
            try:
                self._listener.close()
            except OSError:
                pass
            with self._client_cond:
                if self._client is not None:
                    self._client.close()
                    self._client = None
        return self.summary


def serve(cfg: RunConfig, bind=("127.0.0.1", 0), out_dir: Optional[str] = None,
          human_timeout: Optional[float] = None) -> dict:
    """Convenience wrapper: build a SessionServer and run it to completion."""
    return SessionServer(cfg, bind=bind, out_dir=out_dir,
                         human_timeout=human_timeout).serve()


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------

def replay(log_path: str) -> dict:
    """Re-run the physics for every logged episode and verify the outcomes.

    Returns {"episodes", "mismatches", "status"}; logs produced by this
    package must replay with zero mismatches.
    """
    with open(log_path, "r", encoding="utf-8") as f:
        lines = f.readlines()
    if not lines:
        raise ParseError(f"{log_path}: empty log")

    def parse(idx: int) -> dict:
        try:
            return json.loads(lines[idx])
        except json.JSONDecodeError as e:
            raise ParseError(f"{log_path}: line {idx + 1}: {e}") from e

    header = parse(0)
    if header.get("type") != "header":
        raise ParseError(f"{log_path}: line 1 is not a header")
    cfg = RunConfig.from_dict(header["config"])
    if cfg.config_hash() != header.get("config_hash"):
        raise VersionMismatchError(f"{log_path}: config hash mismatch")
    objects = {name: ObjectShape.from_dict(d)
               for name, d in header["objects"].items()}

    episodes = 0
    mismatches = 0
    status = "COMPLETED"
    for idx in range(1, len(lines)):
        if not lines[idx].strip():
            continue
        rec = parse(idx)
        kind = rec.get("type")
        if kind == "end":
            status = rec.get("status", status)
            continue
        if kind != "episode":
            raise ParseError(f"{log_path}: line {idx + 1}: unknown type {kind!r}")
        episodes += 1
        obj = objects[rec["object"]]
        pose = Pose2(rec["pose"]["x"], rec["pose"]["y"], rec["pose"]["theta"])
        grasp = GraspAction(rec["grasp"]["x"], rec["grasp"]["y"], rec["grasp"]["theta"])
        state = attempt_grasp(obj, pose, grasp, cfg.gripper)

        ok = state.success == rec["grasp_success"]
        img = render_scene_cached(obj, pose, cfg)
        patch = extract_patch(img, tuple(rec["patch_center"]), cfg.policy.patch_size)
        ok &= base64.b64encode(to_pgm(patch.pixels)).decode("ascii") == rec["patch_pgm_b64"]

        adv_success = False
        acted = rec["adversary_action"] is not None
        if acted:
            outcome = apply_disturbance(
                state, obj, cfg.gripper,
                DisturbanceAction(Direction[rec["adversary_action"]],
                                  rec["force_magnitude"]))
            adv_success = not outcome.withstood
            ok &= adv_success == rec["adversary_success"]
        else:
            ok &= rec["adversary_success"] is False

        reward = compute_reward(state.success, acted, adv_success,
                                rec["reward"]["alpha"])
        ok &= (reward.total == rec["reward"]["total"]
               and reward.robot_term == rec["reward"]["robot_term"]
               and reward.human_term == rec["reward"]["human_term"])
        if not ok:
            mismatches += 1
    return {"episodes": episodes, "mismatches": mismatches, "status": status}
