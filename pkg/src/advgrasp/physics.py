"""Deterministic parallel-jaw grasp oracle.

A grasp is evaluated quasi-statically: two jaw segments sweep toward the
grasp center along the closing axis; the grasp succeeds when both jaws make
antipodal contact inside the friction cone. A held object resists an
external disturbance force through three independent constraints:

  axial     jaw clamp force along the closing axis     capacity N_c
  friction  transverse load (incl. weight) at contacts capacity 2*mu*N_c
  torque    moment of the force about the grasp center capacity mu*N_c*L/2

The world is planar (x, y on the table seen top-down); UP/DOWN act on the
vertical lift axis, where gravity pulls DOWN with m*g. Boundary inclusive:
a disturbance of magnitude exactly equal to the capacity is withstood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import NoValidGraspsError, NotGraspedError
from .geometry import Contact, ObjectShape, Pose2, centroid, segment_contact

JAW_SAMPLES = 9          # sweep sample points along each jaw
MIN_SEPARATION = 1e-4    # m, minimum contact separation along the closing axis


@dataclass(frozen=True)
class GripperConfig:
    """Parallel-jaw gripper parameters; normal_force is the clamp force per jaw."""

    jaw_open_width: float = 0.12
    jaw_length: float = 0.04
    normal_force: float = 10.0
    gravity: float = 9.81

    def __post_init__(self):
        for name in ("jaw_open_width", "jaw_length", "normal_force", "gravity"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return {
            "jaw_open_width": self.jaw_open_width,
            "jaw_length": self.jaw_length,
            "normal_force": self.normal_force,
            "gravity": self.gravity,
        }

    @staticmethod
    def from_dict(d: dict) -> "GripperConfig":
        return GripperConfig(**d)


@dataclass(frozen=True)
class GraspAction:
    """Grasp center and closing-axis angle; theta_g canonicalized to [0, pi)."""

    x_g: float
    y_g: float
    theta_g: float

    def __post_init__(self):
        if not (math.isfinite(self.x_g) and math.isfinite(self.y_g) and math.isfinite(self.theta_g)):
            raise ValueError("grasp components must be finite")
        t = math.fmod(self.theta_g, math.pi)
        if t < 0.0:
            t += math.pi
        object.__setattr__(self, "theta_g", t)

    @property
    def axis(self) -> np.ndarray:
        """Closing-axis unit vector in the world plane."""
        return np.array([math.cos(self.theta_g), math.sin(self.theta_g)])


class Direction(Enum):
    """Six disturbance directions; UP/DOWN act on the vertical lift axis."""

    POS_X = 0
    NEG_X = 1
    POS_Y = 2
    NEG_Y = 3
    UP = 4
    DOWN = 5

    @property
    def vec3(self) -> np.ndarray:
        return _DIRECTION_VECS[self.value]


_DIRECTION_VECS = [
    np.array([1.0, 0.0, 0.0]),
    np.array([-1.0, 0.0, 0.0]),
    np.array([0.0, 1.0, 0.0]),
    np.array([0.0, -1.0, 0.0]),
    np.array([0.0, 0.0, 1.0]),
    np.array([0.0, 0.0, -1.0]),
]

DIRECTIONS = tuple(Direction)


@dataclass(frozen=True)
class DisturbanceAction:
    direction: Direction
    magnitude: float

    def __post_init__(self):
        if not self.magnitude > 0.0:
            raise ValueError("magnitude must be positive")


@dataclass(frozen=True)
class DisturbanceOutcome:
    withstood: bool
    limiting_constraint: str  # FRICTION | TORQUE | AXIAL | NONE


@dataclass(frozen=True)
class GraspState:
    """Result of closing the jaws: contacts and grasp-center offset from the centroid."""

    success: bool
    contacts: Optional[tuple]
    grasp: GraspAction
    object_ref: str
    com_offset: tuple


def _sweep_jaw(world: ObjectShape, center: np.ndarray, u: np.ndarray, v: np.ndarray,
               side: float, g: GripperConfig) -> Optional[Contact]:
    """First contact of one jaw sweeping from side*(w/2)*u toward the center."""
    start = center + side * (g.jaw_open_width / 2.0) * u
    sweep_dir = -side * u
    offsets = np.linspace(-g.jaw_length / 2.0, g.jaw_length / 2.0, JAW_SAMPLES)
    best_t = None
    best = None
    for off in offsets:
        origin = start + off * v
        hit = segment_contact(world, origin, sweep_dir, g.jaw_open_width / 2.0)
        if hit is None:
            continue
        t = float(np.dot(np.asarray(hit.point) - origin, sweep_dir))
        if best_t is None or t < best_t - 1e-15:
            best_t, best = t, hit
    return best


def attempt_grasp(obj: ObjectShape, pose: Pose2, grasp: GraspAction,
                  g: GripperConfig) -> GraspState:
    """Close the jaws at the grasp and report whether the object is held.

    Success requires both jaws to contact the object, both contact normals
    inside the friction cone of the closing axis (half-angle arctan(mu)),
    and a contact separation above MIN_SEPARATION along the axis.
    """
    world = obj.transformed(pose)  # shapes are validated at construction
    center = np.array([grasp.x_g, grasp.y_g])
    u = grasp.axis
    v = np.array([-u[1], u[0]])

    c_pos = _sweep_jaw(world, center, u, v, +1.0, g)
    c_neg = _sweep_jaw(world, center, u, v, -1.0, g)
    com_off = center - np.asarray(centroid(world))

    def fail() -> GraspState:
        return GraspState(False, None, grasp, obj.name, (float(com_off[0]), float(com_off[1])))

    if c_pos is None or c_neg is None:
        return fail()
    cone_cos = 1.0 / math.sqrt(1.0 + obj.mu * obj.mu)
    if float(np.dot(c_pos.normal, u)) < cone_cos - 1e-12:
        return fail()
    if float(np.dot(c_neg.normal, -u)) < cone_cos - 1e-12:
        return fail()
    a_pos = float(np.dot(np.asarray(c_pos.point) - center, u))
    a_neg = float(np.dot(np.asarray(c_neg.point) - center, u))
    if a_pos - a_neg <= MIN_SEPARATION:
        return fail()
    return GraspState(True, (c_pos, c_neg), grasp, obj.name,
                      (float(com_off[0]), float(com_off[1])))


def _constraint_bounds(state: GraspState, obj: ObjectShape, g: GripperConfig,
                       direction: Direction) -> tuple:
    """Per-constraint maximum magnitudes (friction, torque, axial), clamped >= 0."""
    d = direction.vec3
    u3 = np.array([*state.grasp.axis, 0.0])
    a = float(np.dot(d, u3))
    q = d - a * u3  # transverse part of the unit force direction
    w = np.array([0.0, 0.0, -obj.mass * g.gravity])
    r3 = np.array([*state.com_offset, 0.0])

    cap_friction = 2.0 * obj.mu * g.normal_force
    cap_torque = obj.mu * g.normal_force * g.jaw_length / 2.0
    cap_axial = g.normal_force

    qn2 = float(np.dot(q, q))
    if qn2 < 1e-24:
        f_friction = math.inf if float(np.linalg.norm(w)) <= cap_friction else 0.0
    else:
        # largest F with ||F*q + w|| <= cap and 0 in the feasible interval
        c0 = float(np.dot(w, w)) - cap_friction * cap_friction
        if c0 > 0.0:
            f_friction = 0.0  # weight alone already exceeds friction
        else:
            b = 2.0 * float(np.dot(q, w))
            f_friction = (-b + math.sqrt(b * b - 4.0 * qn2 * c0)) / (2.0 * qn2)

    tau = float(np.linalg.norm(np.cross(r3, d)))
    f_torque = cap_torque / tau if tau > 1e-12 else math.inf

    f_axial = cap_axial / abs(a) if abs(a) > 1e-12 else math.inf

    return (max(f_friction, 0.0), max(f_torque, 0.0), max(f_axial, 0.0))


def resist_capacity(state: GraspState, obj: ObjectShape, g: GripperConfig,
                    direction: Direction) -> float:
    """Maximum disturbance magnitude the grasp withstands in the given direction."""
    if not state.success:
        raise NotGraspedError("capacity query on a failed grasp")
    return float(min(_constraint_bounds(state, obj, g, direction)))


def apply_disturbance(state: GraspState, obj: ObjectShape, g: GripperConfig,
                      action: DisturbanceAction) -> DisturbanceOutcome:
    """Binary outcome of a disturbance; boundary inclusive (== capacity holds)."""
    if not state.success:
        raise NotGraspedError("disturbance applied to a failed grasp")
    bounds = _constraint_bounds(state, obj, g, action.direction)
    capacity = min(bounds)
    if action.magnitude <= capacity:
        return DisturbanceOutcome(True, "NONE")
    for name, bound in zip(("FRICTION", "TORQUE", "AXIAL"), bounds):
        if bound < action.magnitude:
            return DisturbanceOutcome(False, name)
    # fp corner: magnitude barely above the min bound; blame the binding constraint
    order = ("FRICTION", "TORQUE", "AXIAL")
    return DisturbanceOutcome(False, order[int(np.argmin(bounds))])


def sample_random_grasp(obj: ObjectShape, rng: np.random.Generator) -> GraspAction:
    """Uniform grasp center over the object's bounding box, angle uniform in [0, pi)."""
    (x0, y0), (x1, y1) = obj.bounding_box()
    x = float(rng.uniform(x0, x1))
    y = float(rng.uniform(y0, y1))
    theta = float(rng.uniform(0.0, math.pi))
    return GraspAction(x, y, theta)


def min_capacity(state: GraspState, obj: ObjectShape, g: GripperConfig) -> float:
    """Smallest capacity over the six disturbance directions."""
    return min(resist_capacity(state, obj, g, d) for d in DIRECTIONS)


def calibrate_force(obj: ObjectShape, g: GripperConfig, n_samples: int,
                    rng_seed: int) -> float:
    """Disturbance magnitude separating unstable from robust grasps.

    Samples random successful grasps, takes each grasp's minimum capacity
    over the six directions, and returns the midpoint between the medians
    of the lower and upper terciles of that distribution.
    """
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    rng = np.random.default_rng(rng_seed)
    pose = Pose2()
    caps = []
    attempts = 0
    max_attempts = 100 * n_samples
    while len(caps) < n_samples and attempts < max_attempts:
        attempts += 1
        grasp = sample_random_grasp(obj, rng)
        state = attempt_grasp(obj, pose, grasp, g)
        if state.success:
            caps.append(min_capacity(state, obj, g))
    if len(caps) < 10:
        raise NoValidGraspsError(
            f"{obj.name}: only {len(caps)} successful grasps in {attempts} attempts"
        )
    caps.sort()
    k = max(1, len(caps) // 3)
    lower_med = float(np.median(caps[:k]))
    upper_med = float(np.median(caps[-k:]))
    return 0.5 * (lower_med + upper_med)
