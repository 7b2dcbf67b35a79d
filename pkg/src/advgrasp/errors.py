"""Exception types shared across the package."""


class AdvGraspError(Exception):
    """Base class for all package errors."""


class InvalidShapeError(AdvGraspError):
    """Object shape violates its invariants (non-convex part, bad winding, ...)."""


class NotGraspedError(AdvGraspError):
    """A disturbance/capacity query was made on a failed grasp."""


class NoValidGraspsError(AdvGraspError):
    """Force calibration could not find enough successful grasps."""


class OutOfFrameError(AdvGraspError):
    """Object does not fit inside the camera frame."""


class OutOfBoundsError(AdvGraspError):
    """Pixel coordinate or patch window outside the image."""


class ShapeMismatchError(AdvGraspError):
    """Tensor shapes inconsistent with the network spec."""


class ParseError(AdvGraspError):
    """Malformed serialized data (checkpoint, log line, wire message)."""


class PreconditionError(AdvGraspError):
    """Caller violated an operation precondition (inconsistent flags)."""


class ChannelClosedError(AdvGraspError):
    """The human action channel closed permanently."""


class HumanTimeoutError(AdvGraspError):
    """No human action arrived within the configured timeout."""


class BindFailureError(AdvGraspError):
    """Session server could not bind its listen address."""


class VersionMismatchError(AdvGraspError):
    """Log header config hash does not match its embedded config."""
