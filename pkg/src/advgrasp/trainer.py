"""Training loop: episode execution, per-batch updates, checkpoints, eval.

The loop follows a fixed turn structure per episode: render the scene,
select and execute a grasp, let the adversary answer a successful grasp
with one disturbance, score the episode, and record it. Updates happen once
per batch as a shuffled BCE/RMSProp pass over that batch's records, with
the episode reward as the training target of the selected angle bin.

Logs are JSONL: one header line, one line per episode, one trailer line.
Two runs with the same seed and config produce byte-identical logs.
"""

from __future__ import annotations

import base64
import json
import math
import os
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import tinynet
from .adversary import (Adversary, AdversaryKind, EpisodePhysics,
                        LearnedAdversary, OracleAdversary, build_observation,
                        make_adversary, update_learned)
from .config import RunConfig, resolve_objects
from .errors import ChannelClosedError, HumanTimeoutError
from .geometry import ObjectShape, Pose2
from .imaging import Image, extract_patch, render_scene, to_pgm
from .physics import (DIRECTIONS, Direction, DisturbanceAction, GraspAction,
                      apply_disturbance, attempt_grasp, calibrate_force)
from .policy import (PolicyConfig, RewardBreakdown, cell_to_action,
                     compute_reward, score_grasps, select_cell)

PHASES = ("PRETRAIN", "WARMUP", "ADVERSARIAL", "EVAL")
EVAL_EPISODES_DEFAULT = 50
VALIDATION_EPISODES = 20
EARLY_STOP_WINDOW = 5.0  # percentage points below the best validation post-rate


@dataclass(frozen=True)
class World:
    """One sampled scene: an object at a pose, with its disturbance force."""

    obj: ObjectShape
    pose: Pose2
    force: float


@dataclass
class EpisodeRecord:
    episode_id: int
    phase: str
    object_name: str
    pose: Pose2
    patch_center: tuple
    patch_pgm_b64: str
    angle_idx: int
    grasp: GraspAction
    grasp_success: bool
    adversary_action: Optional[Direction]
    adversary_success: bool
    reward: RewardBreakdown
    force_magnitude: float
    timeout: bool = False

    def to_json_dict(self) -> dict:
        return {
            "type": "episode",
            "episode_id": self.episode_id,
            "phase": self.phase,
            "object": self.object_name,
            "pose": {"x": self.pose.x, "y": self.pose.y, "theta": self.pose.theta},
            "patch_center": [self.patch_center[0], self.patch_center[1]],
            "patch_pgm_b64": self.patch_pgm_b64,
            "angle_idx": self.angle_idx,
            "grasp": {"x": self.grasp.x_g, "y": self.grasp.y_g,
                      "theta": self.grasp.theta_g},
            "grasp_success": self.grasp_success,
            "adversary_action": (self.adversary_action.name
                                 if self.adversary_action is not None else None),
            "adversary_success": self.adversary_success,
            "timeout": self.timeout,
            "force_magnitude": self.force_magnitude,
            "reward": {"robot_term": self.reward.robot_term,
                       "human_term": self.reward.human_term,
                       "alpha": self.reward.alpha,
                       "total": self.reward.total},
        }


@dataclass
class EpisodeView:
    """What an observer (the session service) sees per episode."""

    episode_id: int
    phase: str
    image: Image
    grasp: GraspAction
    grasp_success: bool
    overlay: dict  # {"bar": [[x,y],[x,y]], "contacts": [[x,y], ...]} in pixels


class TrainObserver:
    """Callback hooks; the default implementation ignores everything."""

    def on_state(self, view: EpisodeView) -> None:
        pass

    def on_outcome(self, record: EpisodeRecord) -> None:
        pass

    def on_batch(self, batch_idx: int, episodes_done: int, snatch_count: int) -> None:
        pass


@dataclass
class EvalReport:
    episodes: int
    pre_rate: float
    post_rate: float
    rows: list

    def __post_init__(self):
        assert 0.0 <= self.post_rate <= self.pre_rate <= 100.0

    def to_dict(self) -> dict:
        return {"episodes": self.episodes, "pre_rate": self.pre_rate,
                "post_rate": self.post_rate, "rows": self.rows}

    def to_csv(self) -> str:
        """Per-object pre/post success percentages, one row per object."""
        by_obj = {}
        for r in self.rows:
            by_obj.setdefault(r["object"], []).append(r)
        lines = ["object,episodes,pre_rate,post_rate"]
        for name in sorted(by_obj):
            rows = by_obj[name]
            pre = 100.0 * sum(r["pre"] for r in rows) / len(rows)
            post = 100.0 * sum(r["post"] for r in rows) / len(rows)
            lines.append(f"{name},{len(rows)},{pre:.1f},{post:.1f}")
        lines.append(f"ALL,{self.episodes},{self.pre_rate:.1f},{self.post_rate:.1f}")
        return "\n".join(lines) + "\n"


@dataclass
class TrainResult:
    params: tinynet.NetParams
    checkpoints: list            # NetParams per written checkpoint, in order
    checkpoint_paths: list
    log_path: Optional[str]
    records: list
    pretrain_updates: int
    adversarial_updates: int
    aborted: bool = False


class LogWriter:
    """Append-only JSONL log, flushed per line."""

    def __init__(self, path: Optional[str]):
        self.path = path
        self._f = open(path, "w", encoding="utf-8") if path else None

    def write(self, obj: dict) -> None:
        if self._f is None:
            return
        self._f.write(json.dumps(obj, separators=(",", ":")) + "\n")
        self._f.flush()

    def close(self) -> None:
        if self._f is not None:
            self._f.close()
            self._f = None


def _world_to_px(img: Image, x: float, y: float) -> list:
    mpp = img.meters_per_pixel
    return [x / mpp + img.width // 2, img.height // 2 - y / mpp]


def _overlay(img: Image, grasp: GraspAction, state, jaw_open_width: float) -> dict:
    u = grasp.axis
    half = jaw_open_width / 2.0
    bar = [_world_to_px(img, grasp.x_g - half * u[0], grasp.y_g - half * u[1]),
           _world_to_px(img, grasp.x_g + half * u[0], grasp.y_g + half * u[1])]
    contacts = []
    if state.success and state.contacts:
        contacts = [_world_to_px(img, c.point[0], c.point[1]) for c in state.contacts]
    return {"bar": bar, "contacts": contacts}


def sample_pose(obj: ObjectShape, cfg: RunConfig, rng: np.random.Generator,
                randomize: bool) -> Pose2:
    """A pose keeping every vertex at least two pixels inside the frame."""
    if not randomize:
        return Pose2()
    theta = float(rng.uniform(-math.pi, math.pi))
    rotated = obj.transformed(Pose2(0.0, 0.0, theta))
    (bx0, by0), (bx1, by1) = rotated.bounding_box()
    lim = (min(cfg.imaging.width, cfg.imaging.height) // 2 - 2) * cfg.imaging.meters_per_pixel
    x_lo, x_hi = -lim - bx0, lim - bx1
    y_lo, y_hi = -lim - by0, lim - by1
    x = float(rng.uniform(x_lo, x_hi)) if x_lo < x_hi else 0.0
    y = float(rng.uniform(y_lo, y_hi)) if y_lo < y_hi else 0.0
    return Pose2(x, y, theta)


def sample_world(objects: list, forces: dict, cfg: RunConfig,
                 rng: np.random.Generator) -> World:
    """Uniform object pick, then a pose per the randomize_pose flag."""
    obj = objects[int(rng.integers(len(objects)))] if len(objects) > 1 else objects[0]
    pose = sample_pose(obj, cfg, rng, cfg.train.randomize_pose)
    return World(obj, pose, forces[obj.name])


_CALIBRATION_CACHE: dict = {}


def resolve_forces(objects: list, cfg: RunConfig) -> dict:
    """Per-object disturbance magnitude; AUTO runs the calibration routine.

    Calibration is deterministic in (object, gripper, seed), so results are
    memoized; a training run recalibrates nothing across its phases.
    """
    forces = {}
    for obj in objects:
        if cfg.train.force_magnitude == "auto":
            key = (json.dumps(obj.to_dict(), sort_keys=True),
                   json.dumps(cfg.gripper.to_dict(), sort_keys=True),
                   cfg.train.seed)
            if key not in _CALIBRATION_CACHE:
                _CALIBRATION_CACHE[key] = calibrate_force(obj, cfg.gripper, 500,
                                                          rng_seed=cfg.train.seed)
            forces[obj.name] = _CALIBRATION_CACHE[key]
        else:
            forces[obj.name] = float(cfg.train.force_magnitude)
    return forces


def run_episode(world: World, params: tinynet.NetParams, adversary: Adversary,
                cfg: RunConfig, rng: np.random.Generator, *,
                episode_id: int = 0, phase: str = "ADVERSARIAL",
                policy_cfg: Optional[PolicyConfig] = None,
                observer: Optional[TrainObserver] = None):
    """One full episode; returns (record, patch_pixels, observation_or_None).

    On a human timeout the episode is scored as if the human failed and the
    record is flagged. Channel-closed errors propagate to the caller.
    """
    pcfg = policy_cfg or cfg.policy
    img = render_scene_cached(world.obj, world.pose, cfg)
    matrix = score_grasps(params, img, pcfg, rng)
    cell = select_cell(matrix, pcfg, rng)
    grasp = cell_to_action(matrix, img, pcfg, cell)
    patch = extract_patch(img, matrix.centers[cell[0]], pcfg.patch_size)
    state = attempt_grasp(world.obj, world.pose, grasp, cfg.gripper)

    if observer is not None:
        observer.on_state(EpisodeView(episode_id, phase, img, grasp, state.success,
                                      _overlay(img, grasp, state, cfg.gripper.jaw_open_width)))

    adversary_action = None
    adversary_success = False
    timeout = False
    obs = None
    if state.success and adversary.kind != AdversaryKind.NONE:
        obs = build_observation(img, grasp, cfg.gripper, pcfg.patch_size)
        physics = EpisodePhysics(state, world.obj, cfg.gripper)
        try:
            act = adversary.act(obs, physics, world.force, rng)
        except HumanTimeoutError:
            act = None
            timeout = True
        if act is not None:
            outcome = apply_disturbance(state, world.obj, cfg.gripper, act)
            adversary_action = act.direction
            adversary_success = not outcome.withstood

    reward = compute_reward(state.success, adversary_action is not None,
                            adversary_success, cfg.train.alpha)
    record = EpisodeRecord(
        episode_id=episode_id,
        phase=phase,
        object_name=world.obj.name,
        pose=world.pose,
        patch_center=matrix.centers[cell[0]],
        patch_pgm_b64=base64.b64encode(to_pgm(patch.pixels)).decode("ascii"),
        angle_idx=cell[1],
        grasp=grasp,
        grasp_success=state.success,
        adversary_action=adversary_action,
        adversary_success=adversary_success,
        reward=reward,
        force_magnitude=world.force,
        timeout=timeout,
    )
    if observer is not None:
        observer.on_outcome(record)
    return record, patch, obs


_RENDER_CACHE: dict = {}


def render_scene_cached(obj: ObjectShape, pose: Pose2, cfg: RunConfig) -> Image:
    """Render with a small memo; fixed-pose training re-renders one scene."""
    key = (obj.name, pose.x, pose.y, pose.theta,
           cfg.imaging.width, cfg.imaging.height, cfg.imaging.meters_per_pixel)
    hit = _RENDER_CACHE.get(key)
    if hit is not None:
        return hit
    img = render_scene(obj, pose, cfg.imaging)
    if len(_RENDER_CACHE) > 64:
        _RENDER_CACHE.clear()
    _RENDER_CACHE[key] = img
    return img


def _update_batch(params, opt, batch_records, batch_patches,
                  rng: np.random.Generator):
    """One shuffled BCE/RMSProp pass; target is the episode reward total."""
    order = rng.permutation(len(batch_records))
    for idx in order:
        rec = batch_records[idx]
        grads = tinynet.backward(params, batch_patches[idx], rec.angle_idx,
                                 rec.reward.total)
        params, opt = tinynet.rmsprop_step(params, grads, opt)
    return params, opt


def _header_dict(cfg: RunConfig, objects: list, forces: dict) -> dict:
    return {
        "type": "header",
        "format_version": 1,
        "config_hash": cfg.config_hash(),
        "seed": cfg.train.seed,
        "adversary": cfg.train.adversary,
        "alpha": cfg.train.alpha,
        "force_magnitude": {o.name: forces[o.name] for o in objects},
        "config": cfg.to_dict(),
        "objects": {o.name: o.to_dict() for o in objects},
    }


def pretrain(cfg: RunConfig, rng: Optional[np.random.Generator] = None,
             params: Optional[tinynet.NetParams] = None,
             log: Optional[LogWriter] = None, episode_base: int = 0,
             sink: Optional[list] = None):
    """Self-supervised phase: no adversary, reward is plain grasp success.

    Returns (params, opt, episodes_run, updates). With pretrain_episodes of
    zero the freshly initialized parameters come back unchanged.
    """
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.train.seed, 1]))
    objects = resolve_objects(cfg.train)
    forces = resolve_forces(objects, cfg)
    if params is None:
        params = tinynet.init_params(
            tinynet.default_net_spec(cfg.policy.n_a), cfg.train.seed)
    opt = tinynet.init_opt_state(params, lr=cfg.train.learning_rate)
    adversary = make_adversary(AdversaryKind.NONE)
    m = cfg.train.episodes_per_batch
    total = cfg.train.pretrain_episodes
    episode_id = episode_base
    updates = 0
    batch_records, batch_patches = [], []
    for _ in range(total):
        world = sample_world(objects, forces, cfg, rng)
        record, patch, _ = run_episode(world, params, adversary, cfg, rng,
                                       episode_id=episode_id, phase="PRETRAIN")
        if log is not None:
            log.write(record.to_json_dict())
        if sink is not None:
            sink.append(record)
        batch_records.append(record)
        batch_patches.append(patch)
        episode_id += 1
        if len(batch_records) == m:
            params, opt = _update_batch(params, opt, batch_records, batch_patches, rng)
            updates += 1
            batch_records, batch_patches = [], []
    if batch_records:
        params, opt = _update_batch(params, opt, batch_records, batch_patches, rng)
        updates += 1
    return params, opt, total, updates


def train(cfg: RunConfig, out_dir: Optional[str] = None,
          observer: Optional[TrainObserver] = None,
          human_channel=None, human_timeout: Optional[float] = None) -> TrainResult:
    """Full run: pretrain (or load), optional warm-up, B x M adversarial
    episodes with per-batch updates and checkpoints."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.train.seed, 1]))
    objects = resolve_objects(cfg.train)
    forces = resolve_forces(objects, cfg)
    kind = AdversaryKind(cfg.train.adversary)
    adversary = make_adversary(kind, seed=cfg.train.seed + 1,
                               channel=human_channel, timeout=human_timeout)

    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    log = LogWriter(os.path.join(out_dir, "log.jsonl") if out_dir else None)
    log.write(_header_dict(cfg, objects, forces))

    records: list = []
    aborted = False
    pretrain_updates = 0
    episode_id = 0
    checkpoints, checkpoint_paths = [], []
    adversarial_updates = 0
    snatch_count = 0
    try:
        if cfg.train.init_model:
            params = tinynet.load(cfg.train.init_model)
            opt = tinynet.init_opt_state(params, lr=cfg.train.learning_rate)
        else:
            params, opt, n_pre, pretrain_updates = pretrain(cfg, rng=rng, log=log,
                                                            sink=records)
            episode_id += n_pre

        # warm-up (human sessions): adversary acts, learning disabled
        if kind == AdversaryKind.HUMAN:
            for _ in range(cfg.train.warmup_episodes):
                world = sample_world(objects, forces, cfg, rng)
                record, _, _ = run_episode(world, params, adversary, cfg, rng,
                                           episode_id=episode_id, phase="WARMUP",
                                           observer=observer)
                log.write(record.to_json_dict())
                records.append(record)
                episode_id += 1

        for b in range(cfg.train.batches):
            batch_records, batch_patches, batch_obs = [], [], []
            for _ in range(cfg.train.episodes_per_batch):
                world = sample_world(objects, forces, cfg, rng)
                record, patch, obs = run_episode(world, params, adversary, cfg, rng,
                                                 episode_id=episode_id,
                                                 phase="ADVERSARIAL",
                                                 observer=observer)
                log.write(record.to_json_dict())
                records.append(record)
                batch_records.append(record)
                batch_patches.append(patch)
                batch_obs.append(obs)
                if record.adversary_success:
                    snatch_count += 1
                episode_id += 1
            params, opt = _update_batch(params, opt, batch_records, batch_patches, rng)
            adversarial_updates += 1
            if isinstance(adversary, LearnedAdversary):
                tuples = [(o, DisturbanceAction(r.adversary_action, r.force_magnitude),
                           r.adversary_success)
                          for r, o in zip(batch_records, batch_obs)
                          if o is not None and r.adversary_action is not None]
                update_learned(adversary.state, tuples)
            if (b + 1) % cfg.train.checkpoint_every == 0:
                checkpoints.append(params.copy())
                if out_dir:
                    path = os.path.join(out_dir, f"ckpt_batch{b + 1}.json")
                    tinynet.save(params, path)
                    checkpoint_paths.append(path)
            if observer is not None:
                observer.on_batch(b + 1, episode_id, snatch_count)
    except ChannelClosedError:
        aborted = True
    finally:
        snatches = sum(1 for r in records if r.adversary_success)
        withstands = sum(1 for r in records
                         if r.adversary_action is not None and not r.adversary_success)
        log.write({"type": "end",
                   "status": "ABORTED" if aborted else "COMPLETED",
                   "episodes": len(records),
                   "snatches": snatches,
                   "withstands": withstands})
        log.close()

    return TrainResult(params=params, checkpoints=checkpoints,
                       checkpoint_paths=checkpoint_paths,
                       log_path=log.path, records=records,
                       pretrain_updates=pretrain_updates,
                       adversarial_updates=adversarial_updates,
                       aborted=aborted)


def evaluate(params: tinynet.NetParams, objects: list, cfg: RunConfig,
             episodes: int = EVAL_EPISODES_DEFAULT, seed: int = 0,
             disturbance: str = "random",
             log: Optional[LogWriter] = None) -> EvalReport:
    """Greedy policy for N episodes, one disturbance after each grasp.

    disturbance "random" draws a uniform direction (the dependent-measures
    protocol); "oracle" applies the worst direction (early-stop validation).
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    forces = resolve_forces(objects, cfg)
    pcfg = replace(cfg.policy, exploration="greedy")
    oracle = OracleAdversary()
    rows = []
    pre_count = 0
    post_count = 0
    for e in range(episodes):
        world = sample_world(objects, forces, cfg, rng)
        img = render_scene_cached(world.obj, world.pose, cfg)
        matrix = score_grasps(params, img, pcfg, rng)
        cell = select_cell(matrix, pcfg, rng)
        grasp = cell_to_action(matrix, img, pcfg, cell)
        state = attempt_grasp(world.obj, world.pose, grasp, cfg.gripper)
        direction = None
        post = False
        if state.success:
            pre_count += 1
            if disturbance == "random":
                direction = DIRECTIONS[int(rng.integers(len(DIRECTIONS)))]
            else:
                physics = EpisodePhysics(state, world.obj, cfg.gripper)
                obs = build_observation(img, grasp, cfg.gripper, pcfg.patch_size)
                direction = oracle.act(obs, physics, world.force, rng).direction
            outcome = apply_disturbance(state, world.obj, cfg.gripper,
                                        DisturbanceAction(direction, world.force))
            post = outcome.withstood
            if post:
                post_count += 1
        rows.append({"episode": e, "object": world.obj.name,
                     "pre": bool(state.success),
                     "direction": direction.name if direction else None,
                     "post": bool(post)})
        if log is not None:
            reward = compute_reward(state.success, direction is not None,
                                    bool(direction is not None and not post),
                                    cfg.train.alpha)
            patch = extract_patch(img, matrix.centers[cell[0]], pcfg.patch_size)
            log.write(EpisodeRecord(
                episode_id=e, phase="EVAL", object_name=world.obj.name,
                pose=world.pose, patch_center=matrix.centers[cell[0]],
                patch_pgm_b64=base64.b64encode(to_pgm(patch.pixels)).decode("ascii"),
                angle_idx=cell[1], grasp=grasp, grasp_success=state.success,
                adversary_action=direction,
                adversary_success=bool(direction is not None and not post),
                reward=reward, force_magnitude=world.force).to_json_dict())
    return EvalReport(episodes=episodes,
                      pre_rate=100.0 * pre_count / episodes,
                      post_rate=100.0 * post_count / episodes,
                      rows=rows)


def early_stop_select(checkpoints: list, objects: list, cfg: RunConfig,
                      seed: int = 0,
                      episodes: int = VALIDATION_EPISODES) -> tuple:
    """Earliest checkpoint within EARLY_STOP_WINDOW points of the best
    oracle-disturbance validation post-rate. Returns (index, params)."""
    if not checkpoints:
        raise ValueError("need at least one checkpoint")
    rates = [evaluate(p, objects, cfg, episodes=episodes, seed=seed,
                      disturbance="oracle").post_rate
             for p in checkpoints]
    best = max(rates)
    for i, r in enumerate(rates):
        if r >= best - EARLY_STOP_WINDOW:
            return i, checkpoints[i]
    return len(rates) - 1, checkpoints[-1]
