"""Command-line entry points: train, eval, serve, calibrate, replay, pretrain.

Exit codes: 0 success, 1 usage error, 2 runtime error. Every command takes
its randomness from --seed (default 0); flags override config-file values.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from . import session as session_mod
from . import tinynet, trainer
from .config import RunConfig, resolve_object
from .errors import AdvGraspError
from .physics import calibrate_force


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _load_config(path) -> RunConfig:
    return RunConfig.from_file(path) if path else RunConfig()


def _train_overrides(cfg: RunConfig, args) -> RunConfig:
    tr = cfg.train
    if args.adversary is not None:
        tr = replace(tr, adversary=args.adversary)
    if args.seed is not None:
        tr = replace(tr, seed=args.seed)
    if getattr(args, "episodes", None) is not None:
        tr = replace(tr, pretrain_episodes=args.episodes)
    return cfg.replace(train=tr)


def _cmd_train(args) -> int:
    cfg = _train_overrides(_load_config(args.config), args)
    result = trainer.train(cfg, out_dir=args.out)
    print(json.dumps({
        "log": result.log_path,
        "checkpoints": result.checkpoint_paths,
        "episodes": len(result.records),
        "aborted": result.aborted,
    }, indent=1))
    return 0 if not result.aborted else 2


def _cmd_pretrain(args) -> int:
    cfg = _load_config(args.config)
    tr = replace(cfg.train, seed=args.seed if args.seed is not None else cfg.train.seed)
    if args.episodes is not None:
        tr = replace(tr, pretrain_episodes=args.episodes)
    cfg = cfg.replace(train=tr)
    params, _, episodes, updates = trainer.pretrain(cfg)
    out = args.out or "pretrained.json"
    tinynet.save(params, out)
    print(json.dumps({"model": out, "episodes": episodes, "updates": updates}))
    return 0


def _cmd_eval(args) -> int:
    cfg = _load_config(args.config)
    params = tinynet.load(args.model)
    objects = [resolve_object(o) for o in args.object]
    report = trainer.evaluate(params, objects, cfg, episodes=args.episodes,
                              seed=args.seed if args.seed is not None else 0)
    doc = report.to_dict()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=1)
        csv_path = os.path.splitext(args.out)[0] + ".csv"
        with open(csv_path, "w", encoding="utf-8") as f:
            f.write(report.to_csv())
    print(json.dumps({"episodes": report.episodes, "pre_rate": report.pre_rate,
                      "post_rate": report.post_rate}))
    return 0


def _cmd_serve(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(train=replace(cfg.train, seed=args.seed))
    if cfg.train.adversary != "human":
        cfg = cfg.replace(train=replace(cfg.train, adversary="human"))
    host, _, port = args.bind.rpartition(":")
    server = session_mod.SessionServer(cfg, bind=(host or "127.0.0.1", int(port)),
                                       out_dir=args.out,
                                       human_timeout=args.timeout)
    print(json.dumps({"listening": list(server.address)}), flush=True)
    summary = server.serve()
    print(json.dumps({"summary": summary}))
    return 0


def _cmd_calibrate(args) -> int:
    cfg = _load_config(args.config)
    obj = resolve_object(args.object)
    force = calibrate_force(obj, cfg.gripper, args.samples,
                            rng_seed=args.seed if args.seed is not None else 0)
    print(json.dumps({"object": obj.name, "force": force,
                      "samples": args.samples}))
    return 0


def _cmd_replay(args) -> int:
    summary = session_mod.replay(args.log)
    print(json.dumps(summary))
    return 0 if summary["mismatches"] == 0 else 2


def build_parser() -> _Parser:
    p = _Parser(prog="advgrasp",
                description="Adversarial grasp training at desk scale.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="pretrain + adversarial batches")
    t.add_argument("--config", default=None)
    t.add_argument("--adversary", choices=["none", "random", "learned", "oracle"],
                   default=None)
    t.add_argument("--out", default="runs/train")
    t.add_argument("--seed", type=int, default=None)
    t.set_defaults(fn=_cmd_train)

    pt = sub.add_parser("pretrain", help="self-supervised phase only")
    pt.add_argument("--config", default=None)
    pt.add_argument("--episodes", type=int, default=None)
    pt.add_argument("--out", default=None)
    pt.add_argument("--seed", type=int, default=None)
    pt.set_defaults(fn=_cmd_pretrain)

    e = sub.add_parser("eval", help="greedy policy, random disturbances")
    e.add_argument("--model", required=True)
    e.add_argument("--object", action="append", required=True)
    e.add_argument("--episodes", type=int, default=50)
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--config", default=None)
    e.add_argument("--out", default=None)
    e.set_defaults(fn=_cmd_eval)

    s = sub.add_parser("serve", help="host a live human-adversary session")
    s.add_argument("--config", default=None)
    s.add_argument("--bind", default="127.0.0.1:8765")
    s.add_argument("--out", default="runs/session")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--timeout", type=float, default=None)
    s.set_defaults(fn=_cmd_serve)

    c = sub.add_parser("calibrate", help="per-object disturbance magnitude")
    c.add_argument("--object", required=True)
    c.add_argument("--samples", type=int, default=500)
    c.add_argument("--seed", type=int, default=None)
    c.add_argument("--config", default=None)
    c.set_defaults(fn=_cmd_calibrate)

    r = sub.add_parser("replay", help="verify a JSONL log against the physics")
    r.add_argument("--log", required=True)
    r.set_defaults(fn=_cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.fn(args)
    except AdvGraspError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
