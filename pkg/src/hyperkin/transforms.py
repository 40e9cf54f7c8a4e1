"""Rigid homogeneous transforms and the two elementary link motions.

A link of the arm twists about its own cylindrical axis (``twist_rotation``)
and then bends relative to the previous link (``bend_translation``). The
matrices are taken verbatim from the link model: twist is the block
``[[c, s], [-s, c]]`` acting on x-y, bend is the block ``[[c, s], [-s, c]]``
acting on y-z followed by a translation of ``d`` along the bent z-axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

__all__ = [
    "HomTransform",
    "Twist",
    "IDENTITY",
    "twist_rotation",
    "bend_translation",
    "compose",
    "rotation_log",
    "pose_error",
]


@dataclass(frozen=True, eq=False)
class HomTransform:
    """A 4x4 homogeneous transform. The bottom row is always (0, 0, 0, 1)."""

    matrix: np.ndarray

    @classmethod
    def from_parts(cls, rotation, translation) -> "HomTransform":
        m = np.eye(4)
        m[:3, :3] = rotation
        m[:3, 3] = translation
        return cls(m)

    @classmethod
    def identity(cls) -> "HomTransform":
        return cls(np.eye(4))

    @property
    def rotation(self) -> np.ndarray:
        return self.matrix[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:3, 3]

    def __matmul__(self, other: "HomTransform") -> "HomTransform":
        return HomTransform(self.matrix @ other.matrix)

    def inverse(self) -> "HomTransform":
        rt = self.rotation.T
        return HomTransform.from_parts(rt, -rt @ self.translation)

    def orthonormality_error(self) -> float:
        """Max-abs deviation of RᵀR from I, plus |det R - 1|."""
        r = self.rotation
        ortho = np.max(np.abs(r.T @ r - np.eye(3)))
        return float(max(ortho, abs(np.linalg.det(r) - 1.0)))

    def is_valid(self, tol: float = 1e-10) -> bool:
        m = self.matrix
        return (
            m.shape == (4, 4)
            and bool(np.all(np.isfinite(m)))
            and bool(np.array_equal(m[3], [0.0, 0.0, 0.0, 1.0]))
            and self.orthonormality_error() <= tol
        )

    def max_abs_diff(self, other: "HomTransform") -> float:
        return float(np.max(np.abs(self.matrix - other.matrix)))


IDENTITY = HomTransform.identity()


@dataclass(frozen=True, eq=False)
class Twist:
    """Linear and angular end-effector velocity (or pose error) in the base frame."""

    linear: np.ndarray
    angular: np.ndarray

    @classmethod
    def zero(cls) -> "Twist":
        return cls(np.zeros(3), np.zeros(3))

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])


def _finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise InvalidArgument(f"non-finite angle or length: {v!r}")


def twist_rotation(phi: float) -> HomTransform:
    _finite(phi)
    c, s = math.cos(phi), math.sin(phi)
    return HomTransform(
        np.array(
            [
                [c, s, 0.0, 0.0],
                [-s, c, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
            ]
        )
    )


def bend_translation(theta: float, d: float) -> HomTransform:
    _finite(theta, d)
    if d <= 0:
        raise InvalidArgument(f"link length must be positive, got {d}")
    c, s = math.cos(theta), math.sin(theta)
    return HomTransform(
        np.array(
            [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, c, s, d * s],
                [0.0, -s, c, d * c],
                [0.0, 0.0, 0.0, 1.0],
            ]
        )
    )


def compose(a: HomTransform, b: HomTransform) -> HomTransform:
    return a @ b


def rotation_log(rotation: np.ndarray) -> np.ndarray:
    """Rotation vector (angle * unit axis, angle in [0, pi]) of a rotation matrix.

    At angle pi the axis sign is ambiguous; the axis is read from the column of
    ``R + I`` with the largest diagonal entry and its largest component is made
    positive, so the result is deterministic.
    """
    r = np.asarray(rotation, dtype=float)
    cos_angle = min(1.0, max(-1.0, 0.5 * (np.trace(r) - 1.0)))
    angle = math.acos(cos_angle)
    skew = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    if angle < 1e-6:
        # first-order series of angle / (2 sin angle)
        return 0.5 * (1.0 + angle * angle / 6.0) * skew
    if math.pi - angle > 1e-6:
        return angle / (2.0 * math.sin(angle)) * skew

    # near pi: R ≈ 2 a aᵀ - I
    b = 0.5 * (r + np.eye(3))
    j = int(np.argmax(np.diag(b)))
    axis = b[:, j] / math.sqrt(max(b[j, j], 1e-300))
    # skew carries sin(angle) * axis; use it to fix the sign when it is informative
    if np.dot(skew, axis) < 0:
        axis = -axis
    elif np.dot(skew, axis) == 0 and axis[int(np.argmax(np.abs(axis)))] < 0:
        axis = -axis
    axis /= np.linalg.norm(axis)
    return angle * axis


def pose_error(current: HomTransform, target: HomTransform) -> Twist:
    """Twist that carries ``current`` to ``target`` in one unit of time."""
    linear = target.translation - current.translation
    angular = rotation_log(target.rotation @ current.rotation.T)
    return Twist(linear, angular)
