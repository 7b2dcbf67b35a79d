"""Disturbance policies: none, random, learned, brute-force oracle, live human.

All adversaries share one contract: act() is called only after a successful
grasp and returns either a DisturbanceAction or None. The learned adversary
reuses the grasp network machinery with a six-way head, trained on snatch
outcomes. The oracle enumerates all six directions through the physics
model and is the reproducible stand-in for a well-informed human.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import ChannelClosedError
from .geometry import ObjectShape
from .imaging import Image, Patch, clamp_patch_center, extract_patch
from .physics import (DIRECTIONS, DisturbanceAction, GraspAction, GraspState,
                      GripperConfig, apply_disturbance, resist_capacity)
from . import tinynet

GRIPPER_BAR_INTENSITY = 0.5
LEARNED_EPSILON = 0.1


class AdversaryKind(Enum):
    NONE = "none"
    RANDOM = "random"
    LEARNED = "learned"
    ORACLE = "oracle"
    HUMAN = "human"


@dataclass(frozen=True)
class AdversaryObservation:
    """Grasp-centered patch with the gripper bar composited in."""

    patch: Patch
    grasp: GraspAction


@dataclass(frozen=True)
class EpisodePhysics:
    """Physics context the oracle needs to enumerate outcomes."""

    state: GraspState
    obj: ObjectShape
    gripper: GripperConfig


def composite_gripper_bar(img: Image, grasp: GraspAction,
                          gripper: GripperConfig) -> np.ndarray:
    """Scene pixels with the open-gripper bar drawn at fixed intensity."""
    pixels = img.pixels.copy()
    u = grasp.axis
    half = gripper.jaw_open_width / 2.0
    mpp = img.meters_per_pixel
    n_steps = max(2, int(gripper.jaw_open_width / (0.25 * mpp)))
    for t in np.linspace(-half, half, n_steps):
        x = grasp.x_g + t * u[0]
        y = grasp.y_g + t * u[1]
        i = int(round(x / mpp)) + img.width // 2
        j = img.height // 2 - int(round(y / mpp))
        if 0 <= i < img.width and 0 <= j < img.height:
            pixels[j, i] = GRIPPER_BAR_INTENSITY
    return pixels


def build_observation(img: Image, grasp: GraspAction, gripper: GripperConfig,
                      patch_size: int = 32) -> AdversaryObservation:
    """Patch around the executed grasp, clamped inside the frame."""
    composited = Image(img.width, img.height,
                       composite_gripper_bar(img, grasp, gripper),
                       img.meters_per_pixel)
    mpp = img.meters_per_pixel
    i = int(round(grasp.x_g / mpp)) + img.width // 2
    j = img.height // 2 - int(round(grasp.y_g / mpp))
    center = clamp_patch_center(composited, (i, j), patch_size)
    return AdversaryObservation(extract_patch(composited, center, patch_size), grasp)


@dataclass
class AdversaryNetState:
    """Learned adversary: six-way net, its optimizer, and its replay history."""

    params: tinynet.NetParams
    opt: tinynet.OptState
    replay: list = field(default_factory=list)

    def __post_init__(self):
        if self.params.spec.out_dim != len(DIRECTIONS):
            raise ValueError("adversary net must have a six-way head")


def init_adversary_state(rng_seed: int, lr: float = 1e-3) -> AdversaryNetState:
    spec = tinynet.default_net_spec(out_dim=len(DIRECTIONS))
    params = tinynet.init_params(spec, rng_seed)
    return AdversaryNetState(params, tinynet.init_opt_state(params, lr=lr))


class Adversary:
    """Base class; counts invocations so the turn structure is checkable."""

    kind = AdversaryKind.NONE

    def __init__(self):
        self.invocations = 0

    def act(self, obs: AdversaryObservation, physics: EpisodePhysics,
            magnitude: float, rng: np.random.Generator) -> Optional[DisturbanceAction]:
        self.invocations += 1
        return self._act(obs, physics, magnitude, rng)

    def _act(self, obs, physics, magnitude, rng):
        raise NotImplementedError


class NoneAdversary(Adversary):
    kind = AdversaryKind.NONE

    def _act(self, obs, physics, magnitude, rng):
        return None


class RandomAdversary(Adversary):
    kind = AdversaryKind.RANDOM

    def _act(self, obs, physics, magnitude, rng):
        direction = DIRECTIONS[int(rng.integers(len(DIRECTIONS)))]
        return DisturbanceAction(direction, magnitude)


class OracleAdversary(Adversary):
    """Enumerates all six directions; picks the first that snatches, else the
    direction with the smallest capacity margin."""

    kind = AdversaryKind.ORACLE

    def _act(self, obs, physics, magnitude, rng):
        margins = []
        for d in DIRECTIONS:
            outcome = apply_disturbance(physics.state, physics.obj, physics.gripper,
                                        DisturbanceAction(d, magnitude))
            if not outcome.withstood:
                return DisturbanceAction(d, magnitude)
            margins.append(resist_capacity(physics.state, physics.obj,
                                           physics.gripper, d) - magnitude)
        return DisturbanceAction(DIRECTIONS[int(np.argmin(margins))], magnitude)


class LearnedAdversary(Adversary):
    """Epsilon-greedy over the six-way snatch-probability head."""

    kind = AdversaryKind.LEARNED

    def __init__(self, state: AdversaryNetState, epsilon: float = LEARNED_EPSILON):
        super().__init__()
        self.state = state
        self.epsilon = epsilon

    def _act(self, obs, physics, magnitude, rng):
        if rng.uniform() < self.epsilon:
            direction = DIRECTIONS[int(rng.integers(len(DIRECTIONS)))]
        else:
            scores = tinynet.forward(self.state.params, obs.patch)
            direction = DIRECTIONS[int(np.argmax(scores))]
        return DisturbanceAction(direction, magnitude)


class HumanAdversary(Adversary):
    """Blocks on a session channel until the live human answers.

    The channel must expose request_action(magnitude) -> Direction and may
    raise HumanTimeoutError or ChannelClosedError.
    """

    kind = AdversaryKind.HUMAN

    def __init__(self, channel, timeout: Optional[float] = None):
        super().__init__()
        self.channel = channel
        self.timeout = timeout

    def _act(self, obs, physics, magnitude, rng):
        direction = self.channel.request_action(magnitude, timeout=self.timeout)
        return DisturbanceAction(direction, magnitude)


def update_learned(state: AdversaryNetState, episodes: list) -> AdversaryNetState:
    """One BCE/RMSProp pass over (observation, action, snatched) tuples.

    Gradient flows only through the chosen direction's output, with target 1
    when the snatch succeeded and 0 when it failed.
    """
    for obs, action, snatched in episodes:
        target = 1.0 if snatched else 0.0
        grads = tinynet.backward(state.params, obs.patch,
                                 action.direction.value, target)
        state.params, state.opt = tinynet.rmsprop_step(state.params, grads, state.opt)
    state.replay.extend(episodes)
    return state


def make_adversary(kind: AdversaryKind, seed: int = 0,
                   channel=None, timeout: Optional[float] = None,
                   epsilon: float = LEARNED_EPSILON) -> Adversary:
    """Factory for the non-human kinds; HUMAN needs a live session channel."""
    if kind == AdversaryKind.NONE:
        return NoneAdversary()
    if kind == AdversaryKind.RANDOM:
        return RandomAdversary()
    if kind == AdversaryKind.ORACLE:
        return OracleAdversary()
    if kind == AdversaryKind.LEARNED:
        return LearnedAdversary(init_adversary_state(seed), epsilon=epsilon)
    if kind == AdversaryKind.HUMAN:
        if channel is None:
            raise ChannelClosedError("HUMAN adversary requires a session channel")
        return HumanAdversary(channel, timeout=timeout)
    raise ValueError(f"unknown adversary kind {kind}")
