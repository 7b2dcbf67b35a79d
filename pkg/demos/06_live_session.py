"""A complete human-in-the-loop session, played by a scripted stand-in.

Starts the session server, connects a line-protocol client that always
shoves POS_X, prints the exchange, then verifies the log by replay.

Run:  python demos/06_live_session.py
"""

import json
import socket
import tempfile
import threading

from advgrasp.config import RunConfig, TrainConfig
from advgrasp.session import SessionServer, replay

cfg = RunConfig(train=TrainConfig(objects=("stick",), adversary="human",
                                  pretrain_episodes=0, warmup_episodes=2,
                                  batches=2, episodes_per_batch=4,
                                  force_magnitude=3.0, seed=3))
out_dir = tempfile.mkdtemp(prefix="advgrasp_session_")
server = SessionServer(cfg, bind=("127.0.0.1", 0), out_dir=out_dir)
thread = threading.Thread(target=server.serve, daemon=True)
thread.start()
print(f"serving on {server.address}, logging to {out_dir}\n")

sock = socket.create_connection(server.address, timeout=30)
buf = b""


def send(obj):
    sock.sendall(json.dumps(obj).encode() + b"\n")


def recv():
    global buf
    while b"\n" not in buf:
        chunk = sock.recv(65536)
        if not chunk:
            return None
        buf += chunk
    line, buf = buf.split(b"\n", 1)
    return json.loads(line)


send({"type": "hello", "protocol_version": 1})
hello = recv()
print(f"<- hello (protocol {hello['protocol_version']})")

while True:
    msg = recv()
    if msg is None:
        break
    kind = msg["type"]
    if kind == "state_update":
        print(f"<- state_update ep {msg['episode_id']:2d} [{msg['phase']}] "
              f"grasp at ({msg['grasp']['x']:+.3f}, {msg['grasp']['y']:+.3f}) "
              f"success={msg['grasp_success']}")
    elif kind == "action_request":
        print(f"<- action_request #{msg['request_id']} "
              f"({msg['magnitude']:.1f} N) -> answering POS_X")
        send({"type": "human_action", "request_id": msg["request_id"],
              "direction": "POS_X"})
    elif kind == "outcome":
        verdict = "robot held on" if msg["withstood"] else "snatched it!"
        print(f"<- outcome   #{msg['request_id']} {verdict} "
              f"(reward {msg['reward']})")
    elif kind == "progress":
        print(f"<- progress  batch {msg['batch']}, "
              f"{msg['episodes_done']} episodes, {msg['snatch_count']} snatches")
    elif kind == "session_end":
        print(f"<- session_end {msg['summary']}")
        break

thread.join(timeout=30)
summary = replay(f"{out_dir}/log.jsonl")
print(f"\nreplay check: {summary['episodes']} episodes, "
      f"{summary['mismatches']} mismatches")
