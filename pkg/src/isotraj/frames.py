"""Fixed and mobile coordinate frames.

Axis constants follow SAE J670e (X forward, Y right, Z down). Vectors are
plain ``numpy`` arrays of shape ``(3,)``; a pose carries the mobile-frame
origin and its direction-cosine matrix.

Headings used elsewhere in the package are measured counter-clockwise in the
world X-Y plane (``atan2`` convention), so a positive yaw step is a left turn.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateIntervalError

SAE_FORWARD = np.array([1.0, 0.0, 0.0])
SAE_RIGHT = np.array([0.0, 1.0, 0.0])
SAE_DOWN = np.array([0.0, 0.0, 1.0])

ORTHONORMAL_TOL = 1e-9


def vec3(x=0.0, y=0.0, z=0.0) -> np.ndarray:
    v = np.array([x, y, z], dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite vector component in {v}")
    return v


def as_vec3(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite vector component in {arr}")
    return arr


@dataclass(frozen=True, eq=False)
class RotationMatrix:
    """Direction-cosine matrix; row ``i`` holds the cosines of mobile axis ``i``."""

    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if a.shape != (3, 3) or not np.all(np.isfinite(a)):
            raise ValueError("rotation must be a finite 3x3 matrix")
        if np.max(np.abs(a @ a.T - np.eye(3))) >= ORTHONORMAL_TOL:
            raise ValueError("rotation matrix is not orthonormal")
        if abs(np.linalg.det(a) - 1.0) >= ORTHONORMAL_TOL:
            raise ValueError("rotation matrix has det != +1")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @classmethod
    def identity(cls) -> "RotationMatrix":
        return cls(np.eye(3))

    def __matmul__(self, other):
        return self.a @ other

    def __eq__(self, other):
        return isinstance(other, RotationMatrix) and np.array_equal(self.a, other.a)


def rotation_from_yaw(yaw: float) -> RotationMatrix:
    """Rotation about the Z axis by ``yaw`` radians.

    ``rotation_from_yaw(pi / 2)`` maps ``(1, 0, 0)`` onto ``(0, 1, 0)``.
    """
    if not math.isfinite(yaw):
        raise ValueError(f"yaw must be finite, got {yaw}")
    c, s = math.cos(yaw), math.sin(yaw)
    return RotationMatrix(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]))


@dataclass(frozen=True, eq=False)
class FramePose:
    origin: np.ndarray
    rotation: RotationMatrix = field(default_factory=RotationMatrix.identity)
    timestamp: int = 0
    """Milliseconds; must be a multiple of ``period_ms``."""
    period_ms: int = 20

    def __post_init__(self):
        origin = as_vec3(self.origin).copy()
        origin.setflags(write=False)
        object.__setattr__(self, "origin", origin)
        if int(self.timestamp) != self.timestamp or self.timestamp % self.period_ms:
            raise ValueError(
                f"timestamp {self.timestamp} is not a multiple of {self.period_ms} ms"
            )

    def __eq__(self, other):
        return (
            isinstance(other, FramePose)
            and np.array_equal(self.origin, other.origin)
            and self.rotation == other.rotation
            and self.timestamp == other.timestamp
        )


def transform_point(pose: FramePose, local) -> np.ndarray:
    """World position ``r0 + A @ r'`` of a point given in the mobile frame."""
    return pose.origin + pose.rotation.a @ as_vec3(local)


def inverse_transform(pose: FramePose, world) -> np.ndarray:
    return pose.rotation.a.T @ (as_vec3(world) - pose.origin)


def frame_velocity(prev: FramePose, next: FramePose, local) -> np.ndarray:
    """Velocity (m/s) of a body-fixed point between two poses.

    Differencing the composed transform picks up the rotational transport
    term along with the translation of the origin.
    """
    gap_ms = next.timestamp - prev.timestamp
    if gap_ms <= 0:
        raise DegenerateIntervalError(
            f"poses must advance in time (got {prev.timestamp} -> {next.timestamp} ms)"
        )
    return (transform_point(next, local) - transform_point(prev, local)) / (gap_ms / 1000.0)


def trajectory_velocities(poses, local) -> np.ndarray:
    """Velocities of a body-fixed point along a pose sequence, shape ``(n, 3)``.

    Forward difference at the first pose, backward at the last, central in
    between (non-uniform spacing allowed).
    """
    poses = list(poses)
    if len(poses) < 2:
        raise DegenerateIntervalError("need at least two poses")
    pts = np.array([transform_point(p, local) for p in poses])
    t = np.array([p.timestamp for p in poses], dtype=float) / 1000.0
    if np.any(np.diff(t) <= 0):
        raise DegenerateIntervalError("pose timestamps must be strictly increasing")
    out = np.empty_like(pts)
    out[0] = (pts[1] - pts[0]) / (t[1] - t[0])
    out[-1] = (pts[-1] - pts[-2]) / (t[-1] - t[-2])
    if len(poses) > 2:
        out[1:-1] = (pts[2:] - pts[:-2]) / (t[2:] - t[:-2])[:, None]
    return out
