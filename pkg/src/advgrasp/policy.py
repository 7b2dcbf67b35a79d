"""Grasp selection policy: score sampled patches over angle bins, pick a cell.

A policy evaluation renders to an n_g x n_a probability matrix (one row per
sampled patch, one column per angle bin); the selected cell maps to a world
GraspAction through the image scale and the bin-center angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .imaging import Image, extract_patch, pixel_to_world, sample_patch_centers
from .physics import GraspAction
from .tinynet import NetParams, forward

EXPLORATION_MODES = ("greedy", "epsilon", "softmax")


@dataclass(frozen=True)
class PolicyConfig:
    n_g: int = 20
    n_a: int = 18
    exploration: str = "epsilon"
    epsilon: float = 0.1
    temperature: float = 1.0
    patch_size: int = 32

    def __post_init__(self):
        if self.n_g < 1 or self.n_a < 2:
            raise ValueError("need n_g >= 1 and n_a >= 2")
        if self.exploration not in EXPLORATION_MODES:
            raise ValueError(f"unknown exploration mode {self.exploration!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")
        if not self.temperature > 0.0:
            raise ValueError("temperature must be positive")

    def to_dict(self) -> dict:
        return {"n_g": self.n_g, "n_a": self.n_a, "exploration": self.exploration,
                "epsilon": self.epsilon, "temperature": self.temperature,
                "patch_size": self.patch_size}

    @staticmethod
    def from_dict(d: dict) -> "PolicyConfig":
        return PolicyConfig(**d)


@dataclass(frozen=True)
class ProbabilityMatrix:
    values: np.ndarray  # (n_g, n_a), entries in (0, 1)
    centers: tuple      # n_g pixel (col, row) patch centers


@dataclass(frozen=True)
class RewardBreakdown:
    """Episode reward: robot success term minus alpha times the human term."""

    robot_term: int
    human_term: int
    alpha: float
    total: float


def score_grasps(params: NetParams, img: Image, cfg: PolicyConfig,
                 rng: np.random.Generator) -> ProbabilityMatrix:
    """Forward every sampled patch; row i of the matrix scores patch i."""
    centers = sample_patch_centers(img, cfg.n_g, rng, cfg.patch_size)
    rows = [forward(params, extract_patch(img, c, cfg.patch_size)) for c in centers]
    return ProbabilityMatrix(np.stack(rows), tuple(centers))


def angle_for_bin(k: int, n_a: int) -> float:
    """Bin-center grasp angle; bins tile [0, pi)."""
    return (k + 0.5) * math.pi / n_a


def select_cell(m: ProbabilityMatrix, cfg: PolicyConfig,
                rng: np.random.Generator) -> tuple:
    """(patch_idx, angle_idx) under the configured exploration mode.

    Greedy ties break to the lowest (patch, angle) index pair.
    """
    values = m.values
    flat_argmax = int(np.argmax(values))  # first occurrence = lowest index pair
    greedy = (flat_argmax // values.shape[1], flat_argmax % values.shape[1])
    if cfg.exploration == "greedy":
        return greedy
    if cfg.exploration == "epsilon":
        if rng.uniform() < cfg.epsilon:
            cell = int(rng.integers(values.size))
            return (cell // values.shape[1], cell % values.shape[1])
        return greedy
    # softmax over all cells
    logits = values.ravel() / cfg.temperature
    logits = logits - logits.max()
    p = np.exp(logits)
    p /= p.sum()
    cell = int(rng.choice(values.size, p=p))
    return (cell // values.shape[1], cell % values.shape[1])


def cell_to_action(m: ProbabilityMatrix, img: Image, cfg: PolicyConfig,
                   cell: tuple) -> GraspAction:
    i, k = cell
    x, y = pixel_to_world(img, m.centers[i])
    return GraspAction(x, y, angle_for_bin(k, cfg.n_a))


def select_action(m: ProbabilityMatrix, img: Image, cfg: PolicyConfig,
                  rng: np.random.Generator) -> GraspAction:
    """World-frame grasp for the selected matrix cell."""
    return cell_to_action(m, img, cfg, select_cell(m, cfg, rng))


def compute_reward(grasp_success: bool, human_acted: bool, human_success: bool,
                   alpha: float) -> RewardBreakdown:
    """Reward of one episode: 0 on grasp failure, 1 on unchallenged or
    defended success, 1 - alpha when the adversary snatches the object."""
    if human_success and not human_acted:
        raise PreconditionError("human_success without human_acted")
    if human_acted and not grasp_success:
        raise PreconditionError("adversary acted on a failed grasp")
    if not 0.0 <= alpha <= 1.0:
        raise PreconditionError("alpha must be in [0, 1]")
    robot_term = 1 if grasp_success else 0
    human_term = 1 if human_success else 0
    total = float(robot_term) - alpha * float(human_term)
    return RewardBreakdown(robot_term, human_term, alpha, total)
