"""Desk-scale adversarial grasp training.

A planar grasp simulator, a small from-scratch convolutional grasp
predictor, and a two-player training loop in which an adversary (scripted,
learned, or a live human over a socket) tries to snatch each grasped
object. See README.md for the workflows.
"""

__version__ = "0.1.0"

from .adversary import AdversaryKind
from .config import RunConfig, TrainConfig
from .geometry import ObjectShape, Pose2, load_object
from .imaging import ImagingConfig
from .physics import Direction, GraspAction, GripperConfig
from .policy import PolicyConfig

__all__ = [
    "AdversaryKind",
    "Direction",
    "GraspAction",
    "GripperConfig",
    "ImagingConfig",
    "ObjectShape",
    "PolicyConfig",
    "Pose2",
    "RunConfig",
    "TrainConfig",
    "load_object",
    "__version__",
]
