"""Run configuration: one JSON file with gripper/imaging/policy/train sections."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Union

from .geometry import ObjectShape, load_object
from .imaging import ImagingConfig
from .physics import GripperConfig
from .policy import PolicyConfig

BUNDLED_OBJECTS = ("bottle", "t_shape", "half_nut", "round_nut", "stick")


@dataclass(frozen=True)
class TrainConfig:
    batches: int = 5
    episodes_per_batch: int = 9
    alpha: float = 0.5
    pretrain_episodes: int = 200
    adversary: str = "none"
    objects: tuple = ("stick",)
    randomize_pose: bool = False
    force_magnitude: Union[float, str] = "auto"
    seed: int = 0
    checkpoint_every: int = 1
    warmup_episodes: int = 10   # human sessions only
    init_model: Optional[str] = None
    learning_rate: float = 1e-3

    def __post_init__(self):
        if self.batches < 1 or self.episodes_per_batch < 1:
            raise ValueError("batches and episodes_per_batch must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.pretrain_episodes < 0:
            raise ValueError("pretrain_episodes must be >= 0")
        if isinstance(self.force_magnitude, str) and self.force_magnitude != "auto":
            raise ValueError("force_magnitude is a number or 'auto'")
        object.__setattr__(self, "objects", tuple(self.objects))

    def to_dict(self) -> dict:
        return {
            "batches": self.batches,
            "episodes_per_batch": self.episodes_per_batch,
            "alpha": self.alpha,
            "pretrain_episodes": self.pretrain_episodes,
            "adversary": self.adversary,
            "objects": list(self.objects),
            "randomize_pose": self.randomize_pose,
            "force_magnitude": self.force_magnitude,
            "seed": self.seed,
            "checkpoint_every": self.checkpoint_every,
            "warmup_episodes": self.warmup_episodes,
            "init_model": self.init_model,
            "learning_rate": self.learning_rate,
        }

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        d = dict(d)
        if "objects" in d:
            d["objects"] = tuple(d["objects"])
        return TrainConfig(**d)


@dataclass(frozen=True)
class RunConfig:
    gripper: GripperConfig = field(default_factory=GripperConfig)
    imaging: ImagingConfig = field(default_factory=ImagingConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def to_dict(self) -> dict:
        return {
            "gripper": self.gripper.to_dict(),
            "imaging": self.imaging.to_dict(),
            "policy": self.policy.to_dict(),
            "train": self.train.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "RunConfig":
        return RunConfig(
            gripper=GripperConfig.from_dict(d.get("gripper", {})),
            imaging=ImagingConfig.from_dict(d.get("imaging", {})),
            policy=PolicyConfig.from_dict(d.get("policy", {})),
            train=TrainConfig.from_dict(d.get("train", {})),
        )

    @staticmethod
    def from_file(path: str) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as f:
            return RunConfig.from_dict(json.load(f))

    def replace(self, **sections) -> "RunConfig":
        parts = {"gripper": self.gripper, "imaging": self.imaging,
                 "policy": self.policy, "train": self.train}
        parts.update(sections)
        return RunConfig(**parts)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def resolve_object(spec: str) -> ObjectShape:
    """Load an object by bundled name or filesystem path."""
    if spec in BUNDLED_OBJECTS:
        ref = resources.files("advgrasp").joinpath(f"objects/{spec}.json")
        return ObjectShape.from_dict(json.loads(ref.read_text(encoding="utf-8")))
    return load_object(spec)


def resolve_objects(cfg: TrainConfig) -> list:
    if not cfg.objects:
        raise ValueError("train config lists no objects")
    return [resolve_object(s) for s in cfg.objects]
